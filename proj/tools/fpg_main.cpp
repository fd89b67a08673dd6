// tools/fpg_main.cpp
//
// fpg synth | prep | train | generate | evaluate | ablate
#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fpg/error.hpp"
#include "fpg/experiment/config.hpp"
#include "fpg/experiment/pipeline.hpp"
#include "fpg/log.hpp"

namespace fs = std::filesystem;
using fpg::experiment::ExperimentConfig;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> limit_l;
  std::optional<std::size_t> beam_width;
  std::optional<std::string> history_encoder;
  bool no_history = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Global seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--limit-l", o.limit_l, "Max users kept per candidate news in D_l");
  cmd->add_option("--beam-width", o.beam_width, "Beam width");
  cmd->add_option("--history-encoder", o.history_encoder, "History encoder")
      ->check(CLI::IsMember({"gru", "cnn", "sa"}));
  cmd->add_flag("--no-history", o.no_history, "Train/decode the no-history baseline");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  if (o.seed) {
    c.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (o.out) {
    c.paths.output_dir = *o.out;
  }
  if (o.limit_l) {
    c.data.limit_l = *o.limit_l;
  }
  if (o.beam_width) {
    c.decode.beam_width = *o.beam_width;
  }
  if (o.history_encoder) {
    c.model.history_encoder = fpg::model::history_encoder_from_string(*o.history_encoder);
  }
  if (o.no_history) {
    c.no_history = true;
  }
  c.validate();
  return c;
}

fs::path prep_dir(const ExperimentConfig& c) { return c.paths.output_dir / "prep"; }

fpg::experiment::PreparedData load_or_fail(const ExperimentConfig& c) {
  return fpg::experiment::load_prepared(c, prep_dir(c));
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

void cmd_synth(const ExperimentConfig& config) {
  fpg::data::SyntheticOptions options = config.synth;
  options.seed = config.seed;
  const auto bench = fpg::data::generate_synthetic_benchmark(options);
  const fs::path dir = config.paths.output_dir;
  fpg::experiment::write_synthetic(bench, dir);
  ExperimentConfig resolved = config;
  resolved.paths.corpus = dir / "corpus.jsonl";
  resolved.paths.clicks = dir / "clicks.jsonl";
  resolved.paths.references = dir / "references.jsonl";
  resolved.save(dir / "config.json");
  spdlog::info("wrote {} articles, {} users to {}", bench.corpus.size(), bench.click_logs.size(), dir.string());
}

void cmd_prep(const ExperimentConfig& config) {
  const auto prepared = fpg::experiment::prepare(config);
  fpg::experiment::save_prepared(prepared, config, prep_dir(config));
  spdlog::info("prepared {} pretraining pairs, {} training examples, {}+{} contrastive pairs",
               prepared.pretrain.size(), prepared.distant.size(), prepared.contrastive.size(),
               prepared.contrastive_heldout.size());
}

void cmd_train(const ExperimentConfig& config, int first_stage, const std::optional<std::string>& checkpoint) {
  const auto prepared = load_or_fail(config);
  std::optional<fs::path> ckpt;
  if (checkpoint) {
    ckpt = *checkpoint;
  }
  fpg::experiment::train(config, prepared, config.paths.output_dir / "train", first_stage, ckpt);
}

fs::path default_checkpoint(const ExperimentConfig& config, const std::optional<std::string>& checkpoint) {
  const fs::path path = checkpoint ? fs::path(*checkpoint) : config.paths.output_dir / "train" / "final" / "params.bin";
  if (!fs::exists(path)) {
    throw fpg::experiment::MissingPrerequisite(path, "train");
  }
  return path;
}

void cmd_generate(const ExperimentConfig& config, const std::optional<std::string>& checkpoint) {
  const auto prepared = load_or_fail(config);
  const auto model = fpg::model::FpgModel::from_file(default_checkpoint(config, checkpoint));
  const auto predictions = fpg::experiment::generate(config, prepared, model);
  const fs::path dir = config.paths.output_dir / "generate";
  fpg::decoding::save_predictions(dir / "predictions.jsonl", predictions);
  config.save(dir / "config.json");
}

void cmd_evaluate(const ExperimentConfig& config, const std::optional<std::string>& predictions_path,
                  const std::optional<std::string>& checkpoint) {
  const auto prepared = load_or_fail(config);
  const fs::path preds = predictions_path ? fs::path(*predictions_path)
                                          : config.paths.output_dir / "generate" / "predictions.jsonl";
  if (!fs::exists(preds)) {
    throw fpg::experiment::MissingPrerequisite(preds, "generate");
  }
  std::optional<fpg::model::FpgModel> model;
  if (config.eval.embedder == "model") {
    model.emplace(fpg::model::FpgModel::from_file(default_checkpoint(config, checkpoint)));
  }
  const auto report = fpg::experiment::evaluate(config, prepared, fpg::decoding::load_predictions(preds),
                                                model ? &*model : nullptr);
  const fs::path dir = config.paths.output_dir / "evaluate";
  fpg::eval::save_report(dir / "report.jsonl", report);
  const std::string table = fpg::eval::format_table({{fpg::experiment::variant_name(config), report.aggregate}});
  write_text(dir / "table.txt", table);
  config.save(dir / "config.json");
  std::cout << table;
}

void cmd_ablate(const ExperimentConfig& base) {
  if (!fs::exists(prep_dir(base) / "vocab.txt")) {
    cmd_prep(base);
  }
  const auto prepared = load_or_fail(base);
  std::vector<std::pair<std::string, fpg::eval::Aggregate>> rows;
  nlohmann::json comparison = nlohmann::json::array();
  for (const char* variant : {"gru", "cnn", "sa", "none"}) {
    ExperimentConfig c = base;
    if (std::string(variant) == "none") {
      c.no_history = true;
      c.model.history_encoder = fpg::model::HistoryEncoderKind::gru;
    } else {
      c.no_history = false;
      c.model.history_encoder = fpg::model::history_encoder_from_string(variant);
    }
    const std::string name = fpg::experiment::variant_name(c);
    const fs::path dir = base.paths.output_dir / "ablate" / name;
    spdlog::info("ablation variant {}", name);
    auto trained = fpg::experiment::train(c, prepared, dir / "train");
    const auto predictions = fpg::experiment::generate(c, prepared, trained.model);
    fpg::decoding::save_predictions(dir / "generate" / "predictions.jsonl", predictions);
    const auto report = fpg::experiment::evaluate(c, prepared, predictions, &trained.model);
    fpg::eval::save_report(dir / "evaluate" / "report.jsonl", report);
    c.save(dir / "config.json");
    rows.emplace_back(name, report.aggregate);
    comparison.push_back({{"variant", name},
                          {"p_c_avg", report.aggregate.p_sim_avg},
                          {"p_c_max", report.aggregate.p_sim_max},
                          {"fact_proxy", report.aggregate.fact_score},
                          {"rouge1", report.aggregate.rouge1},
                          {"rouge2", report.aggregate.rouge2},
                          {"rougeL", report.aggregate.rougeL}});
  }
  const fs::path dir = base.paths.output_dir / "ablate";
  const std::string table = fpg::eval::format_table(rows);
  write_text(dir / "table.txt", table);
  write_text(dir / "comparison.json", comparison.dump(2) + "\n");
  base.save(dir / "config.json");
  std::cout << table;
}

}  // namespace

int main(int argc, char** argv) {
  fpg::init_logging();
  CLI::App app{"Personalized fact-preserving headline generation"};
  app.require_subcommand(1);

  Overrides o;
  int first_stage = 1;
  std::optional<std::string> checkpoint;
  std::optional<std::string> predictions;
  std::size_t users = 0;
  std::size_t news = 0;
  std::size_t topics = 0;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
  add_common(synth, o);
  synth->add_option("--users", users, "Number of users");
  synth->add_option("--news", news, "Number of articles");
  synth->add_option("--topics", topics, "Number of topics");
  auto* prep = app.add_subcommand("prep", "Build C, D_l and D*");
  add_common(prep, o);
  auto* train = app.add_subcommand("train", "Run the training schedule");
  add_common(train, o);
  train->add_option("--stage", first_stage, "First stage to run (later stages need --checkpoint)")
      ->check(CLI::Range(1, 4));
  train->add_option("--checkpoint", checkpoint, "Parameter file to resume from");
  auto* gen = app.add_subcommand("generate", "Decode headlines for the reference pairs");
  add_common(gen, o);
  gen->add_option("--checkpoint", checkpoint, "Parameter file (default <out>/train/final/params.bin)");
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions");
  add_common(evaluate, o);
  evaluate->add_option("--predictions", predictions, "Predictions file (default <out>/generate/predictions.jsonl)");
  evaluate->add_option("--checkpoint", checkpoint, "Parameter file for the model embedder");
  auto* ablate = app.add_subcommand("ablate", "Train and compare FPG-GRU/CNN/SA and the no-history baseline");
  add_common(ablate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ExperimentConfig config = resolve(o);
    if (command == "synth") {
      if (!o.out) {
        config.paths.output_dir = "data";
      }
      if (users > 0) {
        config.synth.n_users = users;
      }
      if (news > 0) {
        config.synth.n_news = news;
      }
      if (topics > 0) {
        config.synth.n_topics = topics;
      }
      cmd_synth(config);
    } else if (command == "prep") {
      cmd_prep(config);
    } else if (command == "train") {
      cmd_train(config, first_stage, checkpoint);
    } else if (command == "generate") {
      cmd_generate(config, checkpoint);
    } else if (command == "evaluate") {
      cmd_evaluate(config, predictions, checkpoint);
    } else if (command == "ablate") {
      cmd_ablate(config);
    }
  } catch (const std::exception& e) {
    const nlohmann::json record = {{"error", e.what()}, {"command", command}};
    std::cerr << record.dump() << "\n";
    return 1;
  }
  return 0;
}
