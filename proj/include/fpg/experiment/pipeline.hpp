// include/fpg/experiment/pipeline.hpp
//
// The steps behind the command-line tool. Each step reads its prerequisites
// from the run directory, writes its outputs plus a copy of the resolved
// config, and throws MissingPrerequisite naming the command to run first.
//
//   <out>/prep/      vocab.txt, pretrain.jsonl, train.jsonl, contrastive.jsonl,
//                    contrastive_heldout.jsonl, manifest.json
//   <out>/train/     stage<k>/..., final/params.bin, train_log.jsonl, report.json
//   <out>/generate/  predictions.jsonl
//   <out>/evaluate/  report.jsonl, table.txt
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpg/data/builders.hpp"
#include "fpg/data/records.hpp"
#include "fpg/eval/report.hpp"
#include "fpg/experiment/config.hpp"
#include "fpg/text/vocab.hpp"
#include "fpg/training/trainer.hpp"

namespace fpg::experiment {

class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(const std::filesystem::path& missing, const std::string& command)
      : Error("missing " + missing.string() + "; run `fpg " + command + "` first") {}
};

void write_synthetic(const data::SyntheticBenchmark& bench, const std::filesystem::path& dir);

struct PreparedData {
  data::Corpus corpus;
  std::vector<data::ClickLog> click_logs;
  std::vector<data::Reference> references;
  text::Vocab vocab;
  std::vector<data::PretrainPair> pretrain;
  std::vector<data::TrainExample> distant;
  std::vector<data::ContrastivePair> contrastive;
  std::vector<data::ContrastivePair> contrastive_heldout;
};

// Builds C, D_l and D* from the configured corpus, clicks and references.
PreparedData prepare(const ExperimentConfig& config);
void save_prepared(const PreparedData& prepared, const ExperimentConfig& config, const std::filesystem::path& dir);
PreparedData load_prepared(const ExperimentConfig& config, const std::filesystem::path& dir);

// Model config with the vocabulary size fixed to the prepared vocabulary.
model::ModelConfig resolved_model_config(const ExperimentConfig& config, const text::Vocab& vocab);

training::Datasets tokenize(const PreparedData& prepared, const model::ModelConfig& model_config);

struct TrainOutcome {
  model::FpgModel model;
  training::TrainReport report;
};

// Runs stages first_stage..4. When first_stage > 1 the model is restored from
// `checkpoint`. Writes into `dir` when non-empty.
TrainOutcome train(const ExperimentConfig& config, const PreparedData& prepared, const std::filesystem::path& dir,
                   int first_stage = 1, const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

// One beam-search headline per reference pair, shown with the vocabulary's
// recorded casing.
std::vector<decoding::Prediction> generate(const ExperimentConfig& config, const PreparedData& prepared,
                                           const model::FpgModel& model);

eval::EvalReport evaluate(const ExperimentConfig& config, const PreparedData& prepared,
                          const std::vector<decoding::Prediction>& predictions,
                          const model::FpgModel* model = nullptr);

std::string variant_name(const ExperimentConfig& config);

}  // namespace fpg::experiment
