#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "fpg/model/fpg_model.hpp"
#include "fpg/nn/ops.hpp"
#include "fpg/training/optimizer.hpp"
#include "fpg/training/trainer.hpp"
#include "support/loss_windows.hpp"
#include "support/pipeline_fixture.hpp"

using namespace fpg;
using namespace fpg::training;
using model::Partition;

namespace {

// Sets each parameter's gradient to `grads[i]` through a linear loss.
void set_grads(model::ParameterStore& ps, const std::vector<std::vector<double>>& grads) {
  ps.zero_grad();
  nn::Tape tape;
  nn::TapeScope scope(tape);
  nn::Tensor total = nn::Tensor::scalar(0.0);
  auto& all = ps.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& t = all[i].tensor;
    total = nn::add(total, nn::sum(nn::mul(t, nn::Tensor::from(t.shape(), grads[i]))));
  }
  tape.backward(total);
}

model::ParameterStore two_params() {
  model::ParameterStore ps;
  ps.add("w", {1, 3}, Partition::core, true, {0.5, -1.0, 2.0});
  ps.add("b", {1, 2}, Partition::personal, false, {0.25, -0.75});
  return ps;
}

std::vector<double> values(const model::ParameterStore& ps, std::size_t i) {
  const auto d = ps.all()[i].tensor.data();
  return {d.begin(), d.end()};
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(AdamW, FirstStepClosedForm) {
  auto ps = two_params();
  const std::vector<std::vector<double>> g = {{0.3, -2.0, 1e-3}, {5.0, -0.01}};
  set_grads(ps, g);
  AdamW opt(ps);
  const double lr = 0.1;
  const double wd = 0.2;
  const auto w0 = values(ps, 0);
  const auto b0 = values(ps, 1);
  opt.step(ps, {true, true}, lr, wd);
  const auto w1 = values(ps, 0);
  const auto b1 = values(ps, 1);
  // m/c1 = g and v/c2 = g^2 after one step.
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(w1[k], w0[k] - lr * (g[0][k] / (std::abs(g[0][k]) + 1e-8) + wd * w0[k]), 1e-14);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(b1[k], b0[k] - lr * g[1][k] / (std::abs(g[1][k]) + 1e-8), 1e-14);  // no decay on b
  }
  EXPECT_EQ(opt.steps(), 1u);
  EXPECT_NEAR(opt.first_moments()[0][1], 0.1 * -2.0, 1e-15);
  EXPECT_NEAR(opt.second_moments()[0][1], 0.01 * 4.0, 1e-15);
}

TEST(AdamW, SecondStepMatchesRecurrence) {
  auto ps = two_params();
  AdamW opt(ps);
  const std::vector<std::vector<double>> g1 = {{0.3, -2.0, 0.5}, {1.0, 1.0}};
  const std::vector<std::vector<double>> g2 = {{-0.1, 0.7, 0.5}, {0.0, 2.0}};
  double w = values(ps, 0)[1];
  set_grads(ps, g1);
  opt.step(ps, {true, true}, 0.05, 0.0);
  set_grads(ps, g2);
  opt.step(ps, {true, true}, 0.05, 0.0);
  double m = 0.0;
  double v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1[0][1] : g2[0][1];
    m = 0.9 * m + 0.1 * g;
    v = 0.99 * v + 0.01 * g * g;
    w -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.99, t))) + 1e-8);
  }
  EXPECT_NEAR(values(ps, 0)[1], w, 1e-14);
}

TEST(AdamW, ZeroGradZeroDecayIsNoOp) {
  auto ps = two_params();
  set_grads(ps, {{0, 0, 0}, {0, 0}});
  const auto before = values(ps, 0);
  AdamW opt(ps);
  opt.step(ps, {true, true}, 0.1, 0.0);
  EXPECT_EQ(values(ps, 0), before);
}

TEST(AdamW, ZeroLearningRateIgnoresDecay) {
  auto ps = two_params();
  set_grads(ps, {{1, 2, 3}, {4, 5}});
  const auto w = values(ps, 0);
  const auto b = values(ps, 1);
  AdamW opt(ps);
  opt.step(ps, {true, true}, 0.0, 0.5);
  EXPECT_EQ(values(ps, 0), w);
  EXPECT_EQ(values(ps, 1), b);
}

TEST(AdamW, FrozenParametersBitIdentical) {
  auto ps = two_params();
  set_grads(ps, {{1, 2, 3}, {4, 5}});
  const auto w = values(ps, 0);
  const std::uint64_t personal = ps.checksum(Partition::personal);
  AdamW opt(ps);
  opt.step(ps, {false, true}, 0.1, 0.1);
  EXPECT_EQ(values(ps, 0), w);
  EXPECT_NE(ps.checksum(Partition::personal), personal);
  EXPECT_EQ(opt.first_moments()[0], (std::vector<double>{0, 0, 0}));
}

TEST(AdamW, NonFiniteGradientLeavesEverythingUnchanged) {
  auto ps = two_params();
  set_grads(ps, {{1, 2, 3}, {std::numeric_limits<double>::quiet_NaN(), 0}});
  const std::uint64_t core = ps.checksum(Partition::core);
  const std::uint64_t personal = ps.checksum(Partition::personal);
  AdamW opt(ps);
  try {
    opt.step(ps, {true, true}, 0.1, 0.1);
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.parameter(), "b");
  }
  EXPECT_EQ(ps.checksum(Partition::core), core);
  EXPECT_EQ(ps.checksum(Partition::personal), personal);
  EXPECT_EQ(opt.steps(), 0u);
  // Frozen parameters are not inspected.
  EXPECT_NO_THROW(opt.step(ps, {true, false}, 0.1, 0.1));
}

TEST(AdamW, ClipGradNorm) {
  auto ps = two_params();
  set_grads(ps, {{3, 0, 0}, {0, 4}});
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, {true, true}, 1.0), 5.0);
  EXPECT_NEAR(ps.all()[0].tensor.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(ps.all()[1].tensor.grad()[1], 0.8, 1e-15);
  set_grads(ps, {{0.3, 0, 0}, {0, 0.4}});
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, {true, true}, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(ps.all()[0].tensor.grad()[0], 0.3);
}

TEST(LossWindows, DetectsRisingTrendOnly) {
  std::vector<double> down(120);
  for (std::size_t i = 0; i < down.size(); ++i) {
    down[i] = 1.0 / (1.0 + static_cast<double>(i)) + (i % 7 == 0 ? 0.05 : 0.0);  // noisy but falling
  }
  EXPECT_TRUE(testkit::rising_windows(down, 50).empty());
  std::vector<double> up(down.rbegin(), down.rend());
  EXPECT_EQ(testkit::rising_windows(up, 50).size(), 21u);
  EXPECT_TRUE(testkit::rising_windows(std::vector<double>(99, 1.0), 50).empty());
}

TEST(Schedule, StageMappingAndPresets) {
  EXPECT_EQ(stage_spec(1).trainable, TrainableSet::core);
  EXPECT_EQ(stage_spec(1).dataset, DatasetKind::pretrain);
  EXPECT_EQ(stage_spec(2).trainable, TrainableSet::personal);
  EXPECT_EQ(stage_spec(3).trainable, TrainableSet::all);
  EXPECT_EQ(stage_spec(4).loss, LossKind::contrastive);
  EXPECT_EQ(stage_spec(4).dataset, DatasetKind::contrastive);
  EXPECT_THROW(stage_spec(0), Error);
  EXPECT_THROW(stage_spec(5), Error);
  EXPECT_EQ(StageConfig::paper(3).epochs, 9u);
  EXPECT_DOUBLE_EQ(StageConfig::paper(4).learning_rate, 1e-7);
  EXPECT_EQ(StageConfig::toy(4).stage, 4);
}

class TrainingRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testkit::scratch_dir("training");
    run_ = new testkit::ToyRun(
        testkit::toy_run(dir_, testkit::tiny_experiment(), {.seed = 1, .n_users = 16, .n_news = 48}));
  }
  static void TearDownTestSuite() {
    delete run_;
    std::filesystem::remove_all(dir_);
  }
  static std::array<StageConfig, 4> schedule(std::size_t epochs) {
    std::array<StageConfig, 4> s;
    for (int k = 1; k <= 4; ++k) {
      s[k - 1] = StageConfig::toy(k);
      s[k - 1].epochs = epochs;
      s[k - 1].seed = 10 + k;
    }
    return s;
  }
  static inline std::filesystem::path dir_;
  static inline testkit::ToyRun* run_ = nullptr;
};

TEST_F(TrainingRun, DatasetsNonEmpty) {
  EXPECT_FALSE(run_->data.pretrain.empty());
  EXPECT_FALSE(run_->data.distant.empty());
  EXPECT_FALSE(run_->data.contrastive.empty());
  EXPECT_FALSE(run_->data.contrastive_heldout.empty());
}

TEST_F(TrainingRun, StagePrerequisites) {
  model::FpgModel m(run_->model, 1);
  const auto s = schedule(1);
  try {
    run_stage(m, s[1], run_->data.distant);
    FAIL() << "stage 2 ran without stage 1";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("requires a stage-1 checkpoint"), std::string::npos);
  }
  EXPECT_THROW(run_stage(m, s[0], {}), Error);
  run_stage(m, s[0], run_->data.pretrain);
  EXPECT_EQ(m.completed_stage(), 1);
  EXPECT_THROW(run_stage(m, s[2], run_->data.distant), Error);
}

TEST_F(TrainingRun, FreezingChecksums) {
  model::FpgModel m(run_->model, 1);
  const auto s = schedule(1);
  const auto r1 = run_stage(m, s[0], run_->data.pretrain);
  EXPECT_EQ(r1.personal_checksum_before, r1.personal_checksum_after);
  EXPECT_NE(r1.core_checksum_before, r1.core_checksum_after);

  const std::uint64_t core = m.parameters().checksum(Partition::core);
  const auto r2 = run_stage(m, s[1], run_->data.distant);
  EXPECT_EQ(m.parameters().checksum(Partition::core), core);
  EXPECT_NE(r2.personal_checksum_before, r2.personal_checksum_after);

  const auto r3 = run_stage(m, s[2], run_->data.distant);
  EXPECT_NE(r3.core_checksum_before, r3.core_checksum_after);
  EXPECT_NE(r3.personal_checksum_before, r3.personal_checksum_after);

  const std::uint64_t personal = m.parameters().checksum(Partition::personal);
  auto s4 = s[3];
  s4.learning_rate = 1e-3;
  const auto r4 = run_stage(m, s4, run_->data.contrastive);
  EXPECT_EQ(m.parameters().checksum(Partition::personal), personal);
  EXPECT_NE(r4.core_checksum_before, r4.core_checksum_after);
  EXPECT_EQ(m.completed_stage(), 4);
}

TEST_F(TrainingRun, PlainConditioningSkipsStageTwo) {
  model::FpgModel m(run_->model, 1);
  const auto s = schedule(1);
  StageOptions opt;
  opt.conditioning = model::Conditioning::plain;
  run_stage(m, s[0], run_->data.pretrain, opt);
  const std::uint64_t personal = m.parameters().checksum(Partition::personal);
  const auto r2 = run_stage(m, s[1], run_->data.distant, opt);
  EXPECT_TRUE(r2.skipped);
  EXPECT_EQ(m.completed_stage(), 2);
  run_stage(m, s[2], run_->data.distant, opt);
  EXPECT_EQ(m.parameters().checksum(Partition::personal), personal);
}

TEST_F(TrainingRun, ZeroEpochScheduleKeepsInitialization) {
  model::FpgModel fresh(run_->model, 1);
  model::FpgModel m(run_->model, 1);
  train_full(m, schedule(0), run_->data);
  for (auto p : {Partition::core, Partition::personal}) {
    EXPECT_EQ(m.parameters().checksum(p), fresh.parameters().checksum(p));
  }
}

TEST_F(TrainingRun, FullRunIsByteDeterministic) {
  auto once = [&](const std::string& name) {
    model::FpgModel m(run_->model, 1);
    StageOptions opt;
    opt.checkpoint_dir = dir_ / name;
    const auto report = train_full(m, schedule(1), run_->data, opt);
    EXPECT_TRUE(report.margin_before.has_value());
    EXPECT_TRUE(report.margin_after.has_value());
    return file_bytes(dir_ / name / "final" / "params.bin");
  };
  const std::string a = once("det_a");
  const std::string b = once("det_b");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "det_a" / "stage1" / "latest"));
}

TEST_F(TrainingRun, TrainingLogRecords) {
  model::FpgModel m(run_->model, 1);
  std::ostringstream log;
  StageOptions opt;
  opt.log = &log;
  const auto r = run_stage(m, schedule(2)[0], run_->data.pretrain, opt);
  EXPECT_EQ(r.epoch_losses.size(), 2u);
  std::istringstream in(log.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    for (const char* key : {"\"stage\"", "\"epoch\"", "\"batch\"", "\"loss\"", "\"lr\"", "\"wall_ms\""}) {
      EXPECT_NE(line.find(key), std::string::npos) << line;
    }
  }
  EXPECT_GT(n, 0u);
}

TEST_F(TrainingRun, MarginOfUntrainedModelIsFinite) {
  model::FpgModel m(run_->model, 1);
  const double margin = contrastive_margin(m, run_->data.contrastive_heldout, model::Conditioning::personalized);
  EXPECT_TRUE(std::isfinite(margin));
  EXPECT_THROW(contrastive_margin(m, {}, model::Conditioning::personalized), Error);
}

// Small version of the overfit suite: 8 pairs, 120 epochs.
TEST_F(TrainingRun, OverfitLossWindowMeansNonIncreasing) {
  std::vector<Sample> pairs(run_->data.pretrain.begin(), run_->data.pretrain.begin() + 8);
  model::FpgModel m(run_->model, 1);
  StageConfig s = StageConfig::toy(1);
  s.epochs = 120;
  s.learning_rate = 3e-3;
  s.seed = 11;
  const auto r = run_stage(m, s, pairs);
  ASSERT_EQ(r.epoch_losses.size(), 120u);
  EXPECT_TRUE(testkit::rising_windows(r.epoch_losses, 50).empty());
  EXPECT_LT(r.epoch_losses.back(), 0.5 * r.epoch_losses.front());
}
