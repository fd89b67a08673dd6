// src/training/trainer.cpp
#include "fpg/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

#include "fpg/error.hpp"
#include "fpg/nn/ops.hpp"

namespace fpg::training {

using model::Conditioning;
using model::Partition;

std::string_view to_string(TrainableSet s) {
  switch (s) {
    case TrainableSet::core:
      return "core";
    case TrainableSet::personal:
      return "personal";
    case TrainableSet::all:
      return "core+personal";
  }
  return "core";
}

std::string_view to_string(LossKind l) { return l == LossKind::nll ? "nll" : "contrastive"; }

std::string_view to_string(DatasetKind d) {
  switch (d) {
    case DatasetKind::pretrain:
      return "C";
    case DatasetKind::distant:
      return "D_l";
    case DatasetKind::contrastive:
      return "D*";
  }
  return "C";
}

const StageSpec& stage_spec(int stage) {
  static const StageSpec table[] = {
      {1, TrainableSet::core, LossKind::nll, DatasetKind::pretrain},
      {2, TrainableSet::personal, LossKind::nll, DatasetKind::distant},
      {3, TrainableSet::all, LossKind::nll, DatasetKind::distant},
      {4, TrainableSet::core, LossKind::contrastive, DatasetKind::contrastive},
  };
  if (stage < 1 || stage > 4) {
    throw Error("stage must be 1..4, got " + std::to_string(stage));
  }
  return table[stage - 1];
}

StageConfig StageConfig::toy(int stage) {
  stage_spec(stage);
  // Stage 1 runs at 1e-3: at 3e-3 the from-scratch model settles on template
  // headlines and never learns to copy facts from the body.
  static const std::size_t epochs[] = {30, 10, 10, 2};
  static const double lrs[] = {1e-3, 1e-3, 3e-4, 1e-5};
  StageConfig c;
  c.stage = stage;
  c.epochs = epochs[stage - 1];
  c.learning_rate = lrs[stage - 1];
  return c;
}

StageConfig StageConfig::paper(int stage) {
  stage_spec(stage);
  static const std::size_t epochs[] = {5, 5, 9, 1};
  static const double lrs[] = {3e-5, 1e-4, 3e-5, 1e-7};
  StageConfig c;
  c.stage = stage;
  c.epochs = epochs[stage - 1];
  c.learning_rate = lrs[stage - 1];
  return c;
}

std::vector<bool> trainable_mask(const model::ParameterStore& params, TrainableSet set, Conditioning conditioning) {
  std::vector<bool> mask;
  mask.reserve(params.size());
  for (const auto& p : params.all()) {
    bool on = set == TrainableSet::all || (set == TrainableSet::core) == (p.partition == Partition::core);
    if (conditioning == Conditioning::plain && p.partition == Partition::personal) {
      on = false;
    }
    mask.push_back(on);
  }
  return mask;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Negative used for a pair in a given epoch: kinds are visited round-robin
// and a pair lacking the scheduled kind falls through to the next one.
std::size_t pick_negative(const Sample& s, std::size_t epoch, std::size_t index) {
  const std::size_t kinds = std::size(data::kAllCorruptions);
  for (std::size_t k = 0; k < kinds; ++k) {
    const auto want = data::kAllCorruptions[(epoch + index + k) % kinds];
    for (std::size_t i = 0; i < s.negative_kinds.size(); ++i) {
      if (s.negative_kinds[i] == want) {
        return i;
      }
    }
  }
  return (epoch + index) % s.negatives.size();
}

Conditioning stage_conditioning(int stage, Conditioning requested) {
  return stage == 1 ? Conditioning::plain : requested;
}

void write_checkpoint(const model::FpgModel& model, const AdamW& optimizer, const std::filesystem::path& dir,
                      int stage, std::size_t epoch, double loss) {
  std::filesystem::create_directories(dir);
  model.save(dir / "params.bin");
  optimizer.save(dir / "optimizer.bin", model.parameters());
  const nlohmann::json meta = {{"stage", stage}, {"epoch", epoch}, {"mean_loss", loss},
                               {"optimizer_steps", optimizer.steps()}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
}

}  // namespace

StageReport run_stage(model::FpgModel& model, const StageConfig& stage, const std::vector<Sample>& dataset,
                      const StageOptions& options) {
  const StageSpec& spec = stage_spec(stage.stage);
  if (stage.stage >= 2 && model.completed_stage() < stage.stage - 1) {
    throw Error("stage " + std::to_string(stage.stage) + " requires a stage-" + std::to_string(stage.stage - 1) +
                " checkpoint (model has completed stage " + std::to_string(model.completed_stage()) + ")");
  }
  if (dataset.empty()) {
    throw Error("stage " + std::to_string(stage.stage) + " dataset " + std::string(to_string(spec.dataset)) +
                " is empty");
  }
  if (stage.batch_size == 0) {
    throw Error("batch_size must be positive");
  }
  const Conditioning mode = stage_conditioning(stage.stage, options.conditioning);
  auto& params = model.parameters();
  const std::vector<bool> trainable = trainable_mask(params, spec.trainable, mode);

  StageReport report;
  report.stage = stage.stage;
  report.core_checksum_before = params.checksum(Partition::core);
  report.personal_checksum_before = params.checksum(Partition::personal);
  const auto started = Clock::now();

  if (std::none_of(trainable.begin(), trainable.end(), [](bool b) { return b; })) {
    spdlog::info("stage {}: nothing trainable under plain conditioning, skipped", stage.stage);
    report.skipped = true;
  }

  AdamW optimizer(params);
  std::mt19937_64 shuffle_rng(stage.seed);
  std::mt19937_64 dropout_rng(stage.seed ^ 0x9e3779b97f4a7c15ULL);
  model::ForwardContext ctx;
  ctx.dropout_rng = model.config().dropout > 0.0 ? &dropout_rng : nullptr;
  std::vector<std::size_t> order(dataset.size());

  for (std::size_t epoch = 0; epoch < stage.epochs && !report.skipped; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += stage.batch_size, ++batch_index) {
      const auto batch_start = Clock::now();
      const std::size_t end = std::min(order.size(), begin + stage.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const Sample& s = dataset[order[k]];
        nn::Tape tape;
        nn::TapeScope scope(tape);
        const auto tf = model::teacher_forcing(s.target);
        nn::Tensor loss;
        if (spec.loss == LossKind::nll) {
          loss = model::loss_nll(model.forward(s.body, s.history, tf.inputs, mode, ctx), tf.targets);
        } else {
          if (s.negatives.empty()) {
            throw Error("contrastive sample for " + s.user_id + "/" + s.news_id + " has no negatives");
          }
          const auto state = model.encode(s.body, s.history, mode, ctx);
          const auto neg = model::teacher_forcing(s.negatives[pick_negative(s, epoch, order[k])]);
          loss = model::loss_contrastive(model.decode(state, tf.inputs, mode, ctx), tf.targets,
                                         model.decode(state, neg.inputs, mode, ctx), neg.targets);
        }
        batch_loss += loss.item() * weight;
        tape.backward(nn::scale(loss, weight));
      }
      try {
        if (!std::isfinite(batch_loss)) {
          throw NonFiniteGradient("loss");
        }
        clip_grad_norm(params, trainable, stage.grad_clip);
        optimizer.step(params, trainable, stage.learning_rate, stage.weight_decay);
      } catch (const NonFiniteGradient& e) {
        ++report.aborted_batches;
        spdlog::warn("stage {} epoch {} batch {} aborted: {}", stage.stage, epoch + 1, batch_index, e.what());
        continue;
      }
      loss_sum += batch_loss * static_cast<double>(end - begin);
      loss_count += end - begin;
      if (options.log != nullptr) {
        const nlohmann::json rec = {{"stage", stage.stage},    {"epoch", epoch + 1},
                                    {"batch", batch_index},    {"loss", batch_loss},
                                    {"lr", stage.learning_rate}, {"wall_ms", ms_since(batch_start)}};
        *options.log << rec.dump() << "\n";
      }
    }
    const double mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : std::nan("");
    report.epoch_losses.push_back(mean_loss);
    spdlog::info("stage {} epoch {}/{} mean loss {:.6f}", stage.stage, epoch + 1, stage.epochs, mean_loss);
    if (!options.checkpoint_dir.empty()) {
      const auto sub = options.keep_all_epochs ? "epoch" + std::to_string(epoch + 1) : std::string("latest");
      model.set_completed_stage(stage.stage - 1);
      write_checkpoint(model, optimizer, options.checkpoint_dir / ("stage" + std::to_string(stage.stage)) / sub,
                       stage.stage, epoch + 1, mean_loss);
    }
  }
  params.zero_grad();
  model.set_completed_stage(std::max(model.completed_stage(), stage.stage));
  if (!options.checkpoint_dir.empty()) {
    model.save(options.checkpoint_dir / ("stage" + std::to_string(stage.stage)) / "params.bin");
  }

  report.core_checksum_after = params.checksum(Partition::core);
  report.personal_checksum_after = params.checksum(Partition::personal);
  const bool core_frozen = spec.trainable == TrainableSet::personal;
  const bool personal_frozen = spec.trainable == TrainableSet::core || mode == Conditioning::plain;
  if ((core_frozen && report.core_checksum_before != report.core_checksum_after) ||
      (personal_frozen && report.personal_checksum_before != report.personal_checksum_after)) {
    throw Error("frozen parameters changed during stage " + std::to_string(stage.stage));
  }
  report.wall_ms = ms_since(started);
  return report;
}

double contrastive_margin(const model::FpgModel& model, const std::vector<Sample>& pairs, Conditioning conditioning) {
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
  for (const Sample& s : pairs) {
    const auto state = model.encode(s.body, s.history, conditioning);
    const auto tf = model::teacher_forcing(s.target);
    pos_sum += model::mean_token_log_prob(model.decode(state, tf.inputs, conditioning), tf.targets);
    ++pos_count;
    for (const auto& n : s.negatives) {
      const auto nf = model::teacher_forcing(n);
      neg_sum += model::mean_token_log_prob(model.decode(state, nf.inputs, conditioning), nf.targets);
      ++neg_count;
    }
  }
  if (pos_count == 0 || neg_count == 0) {
    throw Error("contrastive margin needs at least one pair with a negative");
  }
  return pos_sum / static_cast<double>(pos_count) - neg_sum / static_cast<double>(neg_count);
}

TrainReport train_full(model::FpgModel& model, const std::array<StageConfig, 4>& schedule, const Datasets& datasets,
                       const StageOptions& options, int first_stage) {
  TrainReport report;
  for (const StageConfig& stage : schedule) {
    if (stage.stage < first_stage) {
      continue;
    }
    const StageSpec& spec = stage_spec(stage.stage);
    const std::vector<Sample>* data = nullptr;
    switch (spec.dataset) {
      case DatasetKind::pretrain:
        data = &datasets.pretrain;
        break;
      case DatasetKind::distant:
        data = &datasets.distant;
        break;
      case DatasetKind::contrastive:
        data = &datasets.contrastive;
        break;
    }
    const bool measure = spec.loss == LossKind::contrastive && !datasets.contrastive_heldout.empty();
    if (measure) {
      report.margin_before = contrastive_margin(model, datasets.contrastive_heldout, options.conditioning);
    }
    report.stages.push_back(run_stage(model, stage, *data, options));
    if (measure) {
      report.margin_after = contrastive_margin(model, datasets.contrastive_heldout, options.conditioning);
      spdlog::info("held-out contrastive margin {:.6f} -> {:.6f}", *report.margin_before, *report.margin_after);
    }
  }
  if (!options.checkpoint_dir.empty()) {
    model.save(options.checkpoint_dir / "final" / "params.bin");
  }
  return report;
}

}  // namespace fpg::training
