// src/experiment/pipeline.cpp
#include "fpg/experiment/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <spdlog/spdlog.h>

#include "fpg/eval/metrics.hpp"

namespace fpg::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& path, const std::string& command) {
  if (!fs::exists(path)) {
    throw MissingPrerequisite(path, command);
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream(path) << j.dump(2) << "\n";
}

}  // namespace

void write_synthetic(const data::SyntheticBenchmark& bench, const fs::path& dir) {
  fs::create_directories(dir);
  data::save_corpus(dir / "corpus.jsonl", bench.corpus);
  data::save_clicks(dir / "clicks.jsonl", bench.click_logs);
  data::save_references(dir / "references.jsonl", bench.references);
  json topics = json::object();
  for (const auto& [user, topic] : bench.user_topics) {
    topics[user] = topic;
  }
  write_json(dir / "manifest.json", {{"#news", bench.corpus.size()},
                                     {"#users", bench.click_logs.size()},
                                     {"#references", bench.references.size()},
                                     {"#test news", bench.test_news_ids.size()},
                                     {"#candidate news", bench.candidate_news_ids.size()},
                                     {"user_topics", topics}});
}

PreparedData prepare(const ExperimentConfig& config) {
  PreparedData p;
  require_file(config.paths.corpus, "synth");
  require_file(config.paths.clicks, "synth");
  require_file(config.paths.references, "synth");
  p.corpus = data::load_corpus(config.paths.corpus);
  p.click_logs = data::load_clicks(config.paths.clicks, &p.corpus, config.data.history_capacity);
  p.references = data::load_references(config.paths.references);

  std::vector<std::string> dangling;
  for (const auto& r : p.references) {
    if (!p.corpus.contains(r.news_id)) {
      dangling.push_back(r.news_id);
    }
  }
  if (!dangling.empty()) {
    std::string msg = "references point to unknown news:";
    for (const auto& d : dangling) {
      msg += " " + d;
    }
    throw Error(msg);
  }

  p.distant = data::build_training_set(p.corpus, p.click_logs, config.data.limit_l, config.data.history_capacity);
  std::set<std::string> exclude;
  for (const auto& e : p.distant) {
    exclude.insert(e.candidate_news_id);
  }
  for (const auto& r : p.references) {
    exclude.insert(r.news_id);
  }
  p.pretrain = data::build_pretrain_set(p.corpus, exclude);

  std::vector<std::string> texts;
  for (const auto& a : p.corpus.articles()) {
    texts.push_back(a.headline);
    texts.push_back(a.body);
  }
  p.vocab = text::Vocab::build(texts, config.vocab.min_freq, config.vocab.max_size);

  data::ContrastiveOptions options = config.data.contrastive;
  options.seed = config.component_seed(2);
  auto pairs = data::build_contrastive_set(p.corpus, p.distant, eval::fact_consistency_proxy, options);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.component_seed(3));
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_heldout = static_cast<std::size_t>(std::ceil(config.data.heldout_fraction * pairs.size()));
  if (pairs.size() < 2) {
    n_heldout = 0;
  }
  n_heldout = std::min(n_heldout, pairs.size() > 0 ? pairs.size() - 1 : 0);
  std::vector<bool> heldout(pairs.size(), false);
  for (std::size_t i = 0; i < n_heldout; ++i) {
    heldout[order[i]] = true;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (heldout[i] ? p.contrastive_heldout : p.contrastive).push_back(std::move(pairs[i]));
  }
  return p;
}

void save_prepared(const PreparedData& p, const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  p.vocab.save(dir / "vocab.txt");
  data::save_pretrain_set(dir / "pretrain.jsonl", p.pretrain);
  data::save_training_set(dir / "train.jsonl", p.distant);
  data::save_contrastive_set(dir / "contrastive.jsonl", p.contrastive);
  data::save_contrastive_set(dir / "contrastive_heldout.jsonl", p.contrastive_heldout);

  std::map<std::string, std::size_t> per_news;
  std::set<std::string> users;
  for (const auto& e : p.distant) {
    ++per_news[e.candidate_news_id];
    users.insert(e.user_id);
  }
  std::size_t max_users = 0;
  for (const auto& [_, n] : per_news) {
    max_users = std::max(max_users, n);
  }
  write_json(dir / "manifest.json", {{"#news", p.corpus.size()},
                                     {"#users", p.click_logs.size()},
                                     {"#training examples", p.distant.size()},
                                     {"#training users", users.size()},
                                     {"#candidate news", per_news.size()},
                                     {"limit_l", config.data.limit_l},
                                     {"max users per news", max_users},
                                     {"#pretrain pairs", p.pretrain.size()},
                                     {"#contrastive pairs", p.contrastive.size()},
                                     {"#contrastive heldout", p.contrastive_heldout.size()},
                                     {"vocab size", p.vocab.size()}});
  config.save(dir / "config.json");
}

PreparedData load_prepared(const ExperimentConfig& config, const fs::path& dir) {
  for (const char* name : {"vocab.txt", "pretrain.jsonl", "train.jsonl", "contrastive.jsonl",
                           "contrastive_heldout.jsonl"}) {
    require_file(dir / name, "prep");
  }
  PreparedData p;
  p.corpus = data::load_corpus(config.paths.corpus);
  p.click_logs = data::load_clicks(config.paths.clicks, &p.corpus, config.data.history_capacity);
  p.references = data::load_references(config.paths.references);
  p.vocab = text::Vocab::load(dir / "vocab.txt");
  p.pretrain = data::load_pretrain_set(dir / "pretrain.jsonl");
  p.distant = data::load_training_set(dir / "train.jsonl");
  p.contrastive = data::load_contrastive_set(dir / "contrastive.jsonl");
  p.contrastive_heldout = data::load_contrastive_set(dir / "contrastive_heldout.jsonl");
  return p;
}

model::ModelConfig resolved_model_config(const ExperimentConfig& config, const text::Vocab& vocab) {
  model::ModelConfig m = config.model;
  m.vocab_size = vocab.size();
  return m;
}

training::Datasets tokenize(const PreparedData& p, const model::ModelConfig& mc) {
  training::Datasets d;
  d.pretrain = training::pretrain_samples(p.pretrain, p.vocab, mc);
  d.distant = training::training_samples(p.distant, p.corpus, p.vocab, mc);
  d.contrastive = training::contrastive_samples(p.contrastive, p.corpus, p.vocab, mc);
  d.contrastive_heldout = training::contrastive_samples(p.contrastive_heldout, p.corpus, p.vocab, mc);
  return d;
}

TrainOutcome train(const ExperimentConfig& config, const PreparedData& prepared, const fs::path& dir,
                   int first_stage, const std::optional<fs::path>& checkpoint) {
  const model::ModelConfig mc = resolved_model_config(config, prepared.vocab);
  TrainOutcome out{model::FpgModel(mc, config.component_seed(1)), {}};
  if (first_stage > 1) {
    if (!checkpoint) {
      throw Error("starting at stage " + std::to_string(first_stage) + " needs --checkpoint from stage " +
                  std::to_string(first_stage - 1));
    }
    require_file(*checkpoint, "train");
    out.model.load(*checkpoint);
  }
  auto schedule = config.stages;
  for (auto& s : schedule) {
    s.seed = config.component_seed(10 + static_cast<std::uint64_t>(s.stage));
  }
  training::StageOptions options;
  options.conditioning = config.no_history ? model::Conditioning::plain : model::Conditioning::personalized;
  options.keep_all_epochs = config.keep_all_epochs;
  std::ofstream log;
  if (!dir.empty()) {
    fs::create_directories(dir);
    config.save(dir / "config.json");
    options.checkpoint_dir = dir;
    log.open(dir / "train_log.jsonl");
    options.log = &log;
  }
  out.report = training::train_full(out.model, schedule, tokenize(prepared, mc), options, first_stage);

  if (!dir.empty()) {
    json stages = json::array();
    for (const auto& s : out.report.stages) {
      stages.push_back({{"stage", s.stage},
                        {"epoch_losses", s.epoch_losses},
                        {"aborted_batches", s.aborted_batches},
                        {"skipped", s.skipped},
                        {"wall_ms", s.wall_ms},
                        {"core_checksum_before", s.core_checksum_before},
                        {"core_checksum_after", s.core_checksum_after},
                        {"personal_checksum_before", s.personal_checksum_before},
                        {"personal_checksum_after", s.personal_checksum_after}});
    }
    json report = {{"variant", variant_name(config)}, {"stages", stages}};
    if (out.report.margin_before) {
      report["margin_before"] = *out.report.margin_before;
      report["margin_after"] = *out.report.margin_after;
    }
    write_json(dir / "report.json", report);
  }
  return out;
}

std::vector<decoding::Prediction> generate(const ExperimentConfig& config, const PreparedData& prepared,
                                           const model::FpgModel& model) {
  std::map<std::string, const data::ClickLog*> logs;
  for (const auto& l : prepared.click_logs) {
    logs[l.user_id] = &l;
  }
  decoding::BeamOptions options = config.decode;
  options.conditioning = config.no_history ? model::Conditioning::plain : model::Conditioning::personalized;
  const auto& mc = model.config();
  std::vector<decoding::Prediction> out;
  for (const auto& ref : prepared.references) {
    const auto it = logs.find(ref.user_id);
    if (it == logs.end()) {
      throw Error("reference user " + ref.user_id + " has no click log");
    }
    const auto body = training::encode_body(prepared.corpus.at(ref.news_id).body, prepared.vocab, mc);
    std::vector<text::TokenSeq> history;
    if (!config.no_history) {
      if (it->second->clicked_news_ids.empty()) {
        throw Error("user " + ref.user_id + " has an empty click history");
      }
      history = training::encode_history(it->second->clicked_news_ids, prepared.corpus, prepared.vocab, mc);
    }
    const auto result = decoding::beam_search(model, body, history, options);
    out.push_back({ref.user_id, ref.news_id, text::decode_display(result.tokens, prepared.vocab), result.score});
  }
  return out;
}

eval::EvalReport evaluate(const ExperimentConfig& config, const PreparedData& prepared,
                          const std::vector<decoding::Prediction>& predictions, const model::FpgModel* model) {
  if (config.eval.embedder == "model") {
    if (model == nullptr) {
      throw Error("eval.embedder=model needs a trained checkpoint");
    }
    const eval::ModelEmbedder embedder(*model, prepared.vocab);
    return eval::evaluate_run(predictions, prepared.references, prepared.corpus, prepared.click_logs, embedder);
  }
  const auto embedder = eval::corpus_tfidf(prepared.corpus);
  return eval::evaluate_run(predictions, prepared.references, prepared.corpus, prepared.click_logs, *embedder);
}

std::string variant_name(const ExperimentConfig& config) {
  if (config.no_history) {
    return "no-history";
  }
  std::string kind(model::to_string(config.model.history_encoder));
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::toupper(c); });
  return "FPG-" + kind;
}

}  // namespace fpg::experiment
