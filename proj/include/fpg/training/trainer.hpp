// include/fpg/training/trainer.hpp
//
// The four-stage schedule:
//   1  core only,      NLL, pretraining pairs C,    plain encoder-decoder
//   2  personal only,  NLL, distant supervision D_l
//   3  core+personal,  NLL, D_l
//   4  core only,      contrastive loss, D*
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fpg/model/fpg_model.hpp"
#include "fpg/training/optimizer.hpp"
#include "fpg/training/samples.hpp"

namespace fpg::training {

enum class TrainableSet { core, personal, all };
enum class LossKind { nll, contrastive };
enum class DatasetKind { pretrain, distant, contrastive };

std::string_view to_string(TrainableSet s);
std::string_view to_string(LossKind l);
std::string_view to_string(DatasetKind d);

struct StageSpec {
  int stage;
  TrainableSet trainable;
  LossKind loss;
  DatasetKind dataset;
};

// Fixed mapping; throws for ids outside 1..4.
const StageSpec& stage_spec(int stage);

struct StageConfig {
  int stage = 1;
  std::size_t epochs = 1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double grad_clip = 1.0;

  // Shipped toy-scale defaults for a stage.
  static StageConfig toy(int stage);
  // Epochs and learning rates of the published schedule.
  static StageConfig paper(int stage);
};

struct StageOptions {
  // plain trains the no-history baseline: history encoder and history-cross
  // sub-layers stay bypassed and frozen in every stage.
  model::Conditioning conditioning = model::Conditioning::personalized;
  // Per-epoch checkpoints go to <dir>/stage<k>/; empty disables them.
  std::filesystem::path checkpoint_dir;
  // Keep every epoch (epoch<e>/) instead of overwriting latest/.
  bool keep_all_epochs = false;
  std::ostream* log = nullptr;  // JSON lines {stage, epoch, batch, loss, lr, wall_ms}
};

struct StageReport {
  int stage = 0;
  std::vector<double> epoch_losses;
  std::size_t aborted_batches = 0;
  double wall_ms = 0.0;
  std::uint64_t core_checksum_before = 0;
  std::uint64_t core_checksum_after = 0;
  std::uint64_t personal_checksum_before = 0;
  std::uint64_t personal_checksum_after = 0;
  bool skipped = false;  // nothing trainable under the chosen conditioning
};

// Trainable flag per parameter for a stage under a conditioning mode.
std::vector<bool> trainable_mask(const model::ParameterStore& params, TrainableSet set,
                                 model::Conditioning conditioning);

// Throws when the dataset is empty or the model has not completed the
// previous stage. Verifies that frozen partitions are bit-identical afterwards.
StageReport run_stage(model::FpgModel& model, const StageConfig& stage, const std::vector<Sample>& dataset,
                      const StageOptions& options = {});

// Mean over pairs and negatives of mean log p(y+) - mean log p(y-), each a
// per-token average.
double contrastive_margin(const model::FpgModel& model, const std::vector<Sample>& pairs,
                          model::Conditioning conditioning);

struct Datasets {
  std::vector<Sample> pretrain;
  std::vector<Sample> distant;
  std::vector<Sample> contrastive;
  std::vector<Sample> contrastive_heldout;
};

struct TrainReport {
  std::vector<StageReport> stages;
  std::optional<double> margin_before;
  std::optional<double> margin_after;
};

// Stages first_stage..4 in order. Writes <checkpoint_dir>/final/params.bin
// when a checkpoint directory is set.
TrainReport train_full(model::FpgModel& model, const std::array<StageConfig, 4>& schedule, const Datasets& datasets,
                       const StageOptions& options = {}, int first_stage = 1);

}  // namespace fpg::training
