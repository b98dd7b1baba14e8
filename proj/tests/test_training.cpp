#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mflow/synthgen.hpp"
#include "mflow/training.hpp"

using namespace mflow;
namespace fs = std::filesystem;

namespace {
// Reference simulation of the stopping rule, written independently of EarlyStopping.
struct RuleOutcome {
  std::size_t stop_epoch;  // last epoch run
  std::size_t best_epoch;
  bool early;
};

RuleOutcome simulate_rule(const std::vector<double>& losses, std::size_t patience, std::size_t max_epochs) {
  double best = 0;
  std::size_t best_e = 0, since = 0;
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    double l = losses[e - 1];
    if (best_e == 0 || l < best) {
      best = l;
      best_e = e;
      since = 0;
    } else if (++since == patience) {
      return {e, best_e, true};
    }
  }
  return {max_epochs, best_e, false};
}

RuleOutcome run_rule(const std::vector<double>& losses, std::size_t patience, std::size_t max_epochs) {
  std::size_t last = 0, kept = 0;
  auto reason = run_early_stopped(
      max_epochs, patience,
      [&](std::size_t e) {
        last = e;
        return losses[e - 1];
      },
      [&](std::size_t e) { kept = e; });
  return {last, kept, reason == StopReason::EarlyStop};
}

struct Fixture {
  SplitWindows w;
  ModelConfig model;
};

Fixture small_problem(Arch a = Arch::Lstm, std::size_t R = 4) {
  GeneratorConfig g;
  g.topology = make_corridor(2);
  g.weeks = 2;
  g.seed = 4;
  auto d = generate(g);
  SplitSpec sp;
  sp.train = {{g.start, g.start + std::chrono::days(3)}};
  sp.validation = {g.start + std::chrono::days(7), g.start + std::chrono::days(7)};
  sp.test = {g.start + std::chrono::days(8), g.start + std::chrono::days(8)};
  Fixture f;
  f.w = make_split_windows(d.observed, R, 1, sp);
  f.model.arch = a;
  f.model.stations = d.observed.stations();
  f.model.R = R;
  f.model.lstm_hidden = 8;
  f.model.bpnn_hidden = 16;
  f.model.cnn_channels1 = 2;
  f.model.cnn_channels2 = 2;
  return f;
}

TrainConfig quick(std::size_t epochs = 4) {
  TrainConfig t;
  t.max_epochs = epochs;
  t.learning_rate = 3e-3;
  return t;
}
}  // namespace

TEST(EarlyStop, ScriptedExample) {
  auto r = run_rule({5, 4, 6, 7, 8}, 3, 100);
  EXPECT_EQ(r.stop_epoch, 5u);
  EXPECT_EQ(r.best_epoch, 2u);
  EXPECT_TRUE(r.early);
}

TEST(EarlyStop, MonotoneRunsToTheCap) {
  std::vector<double> l;
  for (int i = 0; i < 20; ++i) l.push_back(100.0 - i);
  auto r = run_rule(l, 3, 20);
  EXPECT_EQ(r.stop_epoch, 20u);
  EXPECT_EQ(r.best_epoch, 20u);
  EXPECT_FALSE(r.early);
}

TEST(EarlyStop, EqualLossIsNotAnImprovement) {
  auto r = run_rule({3, 3, 3, 3}, 3, 10);
  EXPECT_EQ(r.stop_epoch, 4u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(EarlyStop, ThousandRandomSequencesMatchTheReference) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> level(0, 9);  // small alphabet: ties are common
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t patience = 1 + rng() % 4, max_epochs = 1 + rng() % 30;
    std::vector<double> l(max_epochs);
    for (auto& x : l) x = level(rng);
    auto want = simulate_rule(l, patience, max_epochs);
    auto got = run_rule(l, patience, max_epochs);
    ASSERT_EQ(got.stop_epoch, want.stop_epoch) << "trial " << trial;
    ASSERT_EQ(got.best_epoch, want.best_epoch) << "trial " << trial;
    ASSERT_EQ(got.early, want.early) << "trial " << trial;
  }
}

TEST(EarlyStop, NonFiniteLossMeansDiverged) {
  std::vector<double> l{3, 2, std::numeric_limits<double>::quiet_NaN(), 1};
  auto r = run_rule(l, 3, 4);
  EXPECT_EQ(r.stop_epoch, 3u);
  EXPECT_EQ(r.best_epoch, 2u);
  EXPECT_EQ(run_early_stopped(4, 3, [&](std::size_t e) { return l[e - 1]; }, [](std::size_t) {}),
            StopReason::Diverged);
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

TEST(Training, ConfigValidation) {
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.patience = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  auto f = small_problem();
  EXPECT_THROW(train(f.model, {}, f.w.validation.samples, quick()), DataError);
  auto wrong = f.model;
  wrong.R = 5;
  EXPECT_THROW(train(wrong, f.w.train.samples, f.w.validation.samples, quick()), ShapeError);
}

TEST(Training, DefaultsFollowTheSetup) {
  TrainConfig t;
  EXPECT_EQ(t.batch_size, 50u);
  EXPECT_EQ(t.learning_rate, 3e-4);
  EXPECT_EQ(t.l2, 1e-8);
  EXPECT_EQ(t.patience, 3u);
}

TEST(Training, ReturnedModelReproducesBestValidationLoss) {
  auto f = small_problem();
  auto dir = fs::temp_directory_path() / "mflow_test_ckpt";
  fs::remove_all(dir);
  auto cfg = quick(5);
  cfg.checkpoint_dir = dir.string();
  auto res = train(f.model, f.w.train.samples, f.w.validation.samples, cfg);
  const auto& rep = res.report;
  ASSERT_GE(rep.best_epoch, 1u);
  // best epoch holds the minimum
  for (double v : rep.validation_rmse) EXPECT_GE(v, rep.best_validation_rmse());
  // re-evaluate the returned model in vehicles
  double s = 0;
  std::size_t n = 0;
  for (const auto& w : f.w.validation.samples) {
    auto y = res.model->predict(w);
    for (std::size_t j = 0; j < y.size(); ++j) {
      s += (y[j] - w.target[j]) * (y[j] - w.target[j]);
      ++n;
    }
  }
  EXPECT_NEAR(std::sqrt(s / double(n)), rep.best_validation_rmse(), 1e-9 * rep.best_validation_rmse());
  // only the best checkpoint survives and it holds the same model
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%03zu.json", rep.best_epoch);
  auto back = load_forecaster((dir / name).string());
  EXPECT_EQ(back->predict(f.w.validation.samples[0]), res.model->predict(f.w.validation.samples[0]));
  EXPECT_EQ(rep.epoch_seconds.size(), rep.epochs());
  EXPECT_EQ(rep.to_json().at("epochs_to_convergence"), rep.best_epoch);
}

TEST(Training, SameSeedSameTrajectory) {
  auto f = small_problem(Arch::Bpnn);
  auto a = train(f.model, f.w.train.samples, f.w.validation.samples, quick(3));
  auto b = train(f.model, f.w.train.samples, f.w.validation.samples, quick(3));
  EXPECT_EQ(a.report.train_loss, b.report.train_loss);
  EXPECT_EQ(a.report.validation_rmse, b.report.validation_rmse);
  auto cfg = quick(3);
  cfg.seed = 2;
  auto c = train(f.model, f.w.train.samples, f.w.validation.samples, cfg);
  EXPECT_NE(c.report.train_loss, a.report.train_loss);
}

TEST(Training, LossGoesDown) {
  auto f = small_problem(Arch::Bpnn);
  auto r = train(f.model, f.w.train.samples, f.w.validation.samples, quick(6));
  EXPECT_LT(r.report.train_loss.back(), r.report.train_loss.front());
  EXPECT_LT(r.report.best_validation_rmse(), r.report.validation_rmse.front() + 1e-12);
}

TEST(Training, DivergenceIsReportedNotThrown) {
  auto f = small_problem(Arch::Bpnn);
  auto cfg = quick(3);
  cfg.use_sgd = true;
  cfg.learning_rate = 1e200;
  auto r = train(f.model, f.w.train.samples, f.w.validation.samples, cfg);
  EXPECT_EQ(r.report.stop, StopReason::Diverged);
  auto rep = train_repeated(f.model, f.w.train.samples, f.w.validation.samples, cfg, 2);
  EXPECT_EQ(rep.diverged, 2u);
  EXPECT_TRUE(std::isnan(rep.mean_validation_rmse));
  EXPECT_NO_THROW(r.report.to_json().dump());
}

TEST(Training, SingleRepeatAggregateIsTheRun) {
  auto f = small_problem(Arch::Bpnn);
  auto rep = train_repeated(f.model, f.w.train.samples, f.w.validation.samples, quick(2), 1);
  auto one = train(f.model, f.w.train.samples, f.w.validation.samples, quick(2));
  ASSERT_EQ(rep.runs.size(), 1u);
  EXPECT_EQ(rep.mean_validation_rmse, one.report.best_validation_rmse());
  EXPECT_EQ(rep.std_validation_rmse, 0.0);
  EXPECT_EQ(rep.mean_seconds, rep.runs[0].report.total_seconds);
}

TEST(Training, RepeatsUseDistinctSeedsAndReproduce) {
  auto f = small_problem(Arch::Bpnn);
  auto a = train_repeated(f.model, f.w.train.samples, f.w.validation.samples, quick(2), 3);
  auto b = train_repeated(f.model, f.w.train.samples, f.w.validation.samples, quick(2), 3);
  EXPECT_EQ(a.mean_validation_rmse, b.mean_validation_rmse);
  EXPECT_EQ(a.std_validation_rmse, b.std_validation_rmse);
  EXPECT_NE(a.runs[0].report.validation_rmse, a.runs[1].report.validation_rmse);
  EXPECT_NE(repeat_seed(1, 0), repeat_seed(1, 1));
}

TEST(Training, MeanStd) {
  auto [m, s] = mean_std({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_DOUBLE_EQ(s, std::sqrt(5.0 / 3.0));
  EXPECT_TRUE(std::isnan(mean_std({}).first));
}

// Desk-scale timing: CNN stops after far fewer epochs than CNN-LSTM, so its mean
// total training time is lower even though an epoch costs more.
TEST(TrainingSlow, CnnTrainsFasterThanCnnLstm) {
  GeneratorConfig g;
  g.topology = make_corridor(3);
  g.weeks = 4;
  g.seed = 5;
  auto d = generate(g);
  auto w = make_split_windows(d.observed, 6, 1, SplitSpec::consecutive_weeks(g.start, 2));
  double secs[2];
  int k = 0;
  for (auto a : {Arch::Cnn, Arch::CnnLstm}) {
    ModelConfig m;
    m.arch = a;
    m.stations = d.observed.stations();
    m.R = 6;
    auto r = train_repeated(m, w.train.samples, w.validation.samples, TrainConfig{}, 2);
    secs[k++] = r.mean_seconds;
  }
  EXPECT_LT(secs[0], secs[1]) << "cnn " << secs[0] << "s, cnn-lstm " << secs[1] << "s";
}
