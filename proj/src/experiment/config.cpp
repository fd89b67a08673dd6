// src/experiment/config.cpp
#include "fpg/experiment/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "fpg/error.hpp"

namespace fpg::experiment {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error("invalid config field '" + field + "': " + why);
}

void reject_unknown(const json& j, const std::string& prefix, const std::set<std::string>& known) {
  if (!j.is_object()) {
    bad_field(prefix.empty() ? "<root>" : prefix, "must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      bad_field(prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
  }
}

template <typename T>
void read(const json& j, const std::string& prefix, const char* key, T& field) {
  if (!j.contains(key)) {
    return;
  }
  try {
    j.at(key).get_to(field);
  } catch (const json::exception&) {
    bad_field(prefix.empty() ? key : prefix + "." + key, "wrong type");
  }
}

void read_path(const json& j, const char* key, std::filesystem::path& field) {
  std::string s = field.string();
  read(j, "paths", key, s);
  field = s;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (int k = 1; k <= 4; ++k) {
    stages[static_cast<std::size_t>(k - 1)] = training::StageConfig::toy(k);
  }
}

std::uint64_t ExperimentConfig::component_seed(std::uint64_t component) const {
  // splitmix64 of (seed, component)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (component + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(std::string("model: ") + e.what());
  }
  if (vocab.max_size <= text::kNumReserved) {
    bad_field("vocab.max_size", "must exceed the 4 reserved tokens");
  }
  if (vocab.max_size > model.vocab_size) {
    bad_field("vocab.max_size", "must not exceed model.vocab_size");
  }
  if (data.limit_l < 1) {
    bad_field("data.limit_l", "must be at least 1");
  }
  if (data.history_capacity < 1) {
    bad_field("data.history_capacity", "must be at least 1");
  }
  if (data.contrastive.k_neg < 1) {
    bad_field("data.contrastive.k_neg", "must be at least 1");
  }
  if (data.contrastive.top_fraction <= 0.0 || data.contrastive.top_fraction > 1.0) {
    bad_field("data.contrastive.top_fraction", "must lie in (0, 1]");
  }
  if (data.heldout_fraction < 0.0 || data.heldout_fraction >= 1.0) {
    bad_field("data.heldout_fraction", "must lie in [0, 1)");
  }
  if (schedule_preset != "toy" && schedule_preset != "paper") {
    bad_field("schedule_preset", "must be toy or paper");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string p = "stages[" + std::to_string(i) + "]";
    if (s.stage != static_cast<int>(i) + 1) {
      bad_field(p + ".stage", "stages must be listed in order 1..4");
    }
    if (s.learning_rate < 0.0) {
      bad_field(p + ".learning_rate", "must be non-negative");
    }
    if (s.batch_size < 1) {
      bad_field(p + ".batch_size", "must be at least 1");
    }
    if (s.weight_decay < 0.0) {
      bad_field(p + ".weight_decay", "must be non-negative");
    }
    if (s.grad_clip <= 0.0) {
      bad_field(p + ".grad_clip", "must be positive");
    }
  }
  if (decode.beam_width < 1) {
    bad_field("decode.beam_width", "must be at least 1");
  }
  if (eval.embedder != "tfidf" && eval.embedder != "model") {
    bad_field("eval.embedder", "must be tfidf or model");
  }
}

std::string ExperimentConfig::to_json() const {
  json st = json::array();
  for (const auto& s : stages) {
    st.push_back({{"stage", s.stage},
                  {"epochs", s.epochs},
                  {"learning_rate", s.learning_rate},
                  {"batch_size", s.batch_size},
                  {"weight_decay", s.weight_decay},
                  {"grad_clip", s.grad_clip}});
  }
  const json j = {
      {"paths",
       {{"corpus", paths.corpus.string()},
        {"clicks", paths.clicks.string()},
        {"references", paths.references.string()},
        {"output_dir", paths.output_dir.string()}}},
      {"seed", seed},
      {"model", json::parse(model.to_json())},
      {"vocab", {{"min_freq", vocab.min_freq}, {"max_size", vocab.max_size}}},
      {"data",
       {{"limit_l", data.limit_l},
        {"history_capacity", data.history_capacity},
        {"heldout_fraction", data.heldout_fraction},
        {"contrastive",
         {{"k_neg", data.contrastive.k_neg},
          {"score_threshold", data.contrastive.score_threshold},
          {"top_fraction", data.contrastive.top_fraction}}}}},
      {"schedule_preset", schedule_preset},
      {"stages", st},
      {"keep_all_epochs", keep_all_epochs},
      {"decode",
       {{"beam_width", decode.beam_width},
        {"max_len", decode.max_len},
        {"length_penalty", decode.length_penalty}}},
      {"eval", {{"embedder", eval.embedder}}},
      {"no_history", no_history},
      {"synth",
       {{"n_users", synth.n_users}, {"n_news", synth.n_news}, {"n_topics", synth.n_topics}}},
  };
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "", {"paths", "seed", "model", "vocab", "data", "schedule_preset", "stages", "keep_all_epochs",
                         "decode", "eval", "no_history", "synth"});
  ExperimentConfig c;
  read(j, "", "seed", c.seed);
  read(j, "", "schedule_preset", c.schedule_preset);
  read(j, "", "keep_all_epochs", c.keep_all_epochs);
  read(j, "", "no_history", c.no_history);
  if (c.schedule_preset == "paper") {
    for (int k = 1; k <= 4; ++k) {
      c.stages[static_cast<std::size_t>(k - 1)] = training::StageConfig::paper(k);
    }
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, "paths", {"corpus", "clicks", "references", "output_dir"});
    read_path(p, "corpus", c.paths.corpus);
    read_path(p, "clicks", c.paths.clicks);
    read_path(p, "references", c.paths.references);
    read_path(p, "output_dir", c.paths.output_dir);
  }
  if (j.contains("model")) {
    try {
      c.model = model::ModelConfig::from_json(j.at("model").dump());
    } catch (const Error& e) {
      throw Error(std::string("model: ") + e.what());
    }
  }
  if (j.contains("vocab")) {
    const auto& v = j.at("vocab");
    reject_unknown(v, "vocab", {"min_freq", "max_size"});
    read(v, "vocab", "min_freq", c.vocab.min_freq);
    read(v, "vocab", "max_size", c.vocab.max_size);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"limit_l", "history_capacity", "heldout_fraction", "contrastive"});
    read(d, "data", "limit_l", c.data.limit_l);
    read(d, "data", "history_capacity", c.data.history_capacity);
    read(d, "data", "heldout_fraction", c.data.heldout_fraction);
    if (d.contains("contrastive")) {
      const auto& cc = d.at("contrastive");
      reject_unknown(cc, "data.contrastive", {"k_neg", "score_threshold", "top_fraction"});
      read(cc, "data.contrastive", "k_neg", c.data.contrastive.k_neg);
      read(cc, "data.contrastive", "score_threshold", c.data.contrastive.score_threshold);
      read(cc, "data.contrastive", "top_fraction", c.data.contrastive.top_fraction);
    }
  }
  if (j.contains("stages")) {
    const auto& st = j.at("stages");
    if (!st.is_array() || st.size() != 4) {
      bad_field("stages", "must be an array of 4 stage objects");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string p = "stages[" + std::to_string(i) + "]";
      reject_unknown(st[i], p, {"stage", "epochs", "learning_rate", "batch_size", "weight_decay", "grad_clip"});
      auto& s = c.stages[i];
      read(st[i], p, "stage", s.stage);
      read(st[i], p, "epochs", s.epochs);
      read(st[i], p, "learning_rate", s.learning_rate);
      read(st[i], p, "batch_size", s.batch_size);
      read(st[i], p, "weight_decay", s.weight_decay);
      read(st[i], p, "grad_clip", s.grad_clip);
    }
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    reject_unknown(d, "decode", {"beam_width", "max_len", "length_penalty"});
    read(d, "decode", "beam_width", c.decode.beam_width);
    read(d, "decode", "max_len", c.decode.max_len);
    read(d, "decode", "length_penalty", c.decode.length_penalty);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, "eval", {"embedder"});
    read(e, "eval", "embedder", c.eval.embedder);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    reject_unknown(s, "synth", {"n_users", "n_news", "n_topics"});
    read(s, "synth", "n_users", c.synth.n_users);
    read(s, "synth", "n_news", c.synth.n_news);
    read(s, "synth", "n_topics", c.synth.n_topics);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot read config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream(path) << to_json() << "\n";
}

}  // namespace fpg::experiment
