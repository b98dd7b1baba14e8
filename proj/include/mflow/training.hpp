#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/dataset.hpp"
#include "mflow/error.hpp"
#include "mflow/models/forecaster.hpp"
#include "mflow/models/networks.hpp"
#include "mflow/numcore/optim.hpp"
#include "mflow/random.hpp"

namespace mflow {

struct TrainConfig {
  std::size_t batch_size = 50;
  double learning_rate = 3e-4;
  double l2 = 1e-8;
  std::size_t patience = 3;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 1;
  bool use_sgd = false;  // comparator only
  std::optional<std::string> checkpoint_dir;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (!(l2 >= 0)) throw ConfigError("l2 must be non-negative");
  }

  nlohmann::json to_json() const {
    return {{"batch_size", batch_size}, {"learning_rate", learning_rate}, {"l2", l2},
            {"patience", patience},     {"max_epochs", max_epochs},       {"seed", seed},
            {"optimizer", use_sgd ? "sgd" : "adam"}};
  }

  void merge_json(const nlohmann::json& j) {
    batch_size = j.value("batch_size", batch_size);
    learning_rate = j.value("learning_rate", learning_rate);
    l2 = j.value("l2", l2);
    patience = j.value("patience", patience);
    max_epochs = j.value("max_epochs", max_epochs);
    seed = j.value("seed", seed);
    if (j.contains("optimizer")) {
      auto o = j.at("optimizer").get<std::string>();
      if (o != "adam" && o != "sgd") throw ConfigError("optimizer must be adam or sgd");
      use_sgd = o == "sgd";
    }
  }
};

enum class StopReason { EarlyStop, MaxEpochs, Diverged };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::EarlyStop: return "early-stop";
    case StopReason::MaxEpochs: return "max-epochs";
    case StopReason::Diverged: return "diverged";
  }
  return "?";
}

/// Tracks the validation loss and decides when to stop: an epoch improves only if its
/// loss is strictly below the best so far; training stops once `patience` consecutive
/// epochs fail to improve.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
  }

  /// Records one epoch's loss. Returns true if training should stop now.
  bool update(double loss) {
    ++epochs_;
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epochs_;
      bad_ = 0;
    } else {
      ++bad_;
    }
    return bad_ >= patience_;
  }

  bool improved_last() const { return best_epoch_ == epochs_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any epoch
  double best_loss() const { return best_loss_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0, best_epoch_ = 0, bad_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainReport {
  std::string arch;
  std::vector<double> train_loss;       // mean normalised MSE per epoch
  std::vector<double> validation_rmse;  // vehicles
  std::size_t best_epoch = 0;           // 1-based
  StopReason stop = StopReason::MaxEpochs;
  std::vector<double> epoch_seconds;
  double total_seconds = 0;

  double best_validation_rmse() const {
    return best_epoch ? validation_rmse[best_epoch - 1] : std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t epochs() const { return validation_rmse.size(); }

  nlohmann::json to_json() const {
    auto clean = [](const std::vector<double>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
      return a;
    };
    return {{"arch", arch},
            {"train_loss", clean(train_loss)},
            {"validation_rmse", clean(validation_rmse)},
            {"best_epoch", best_epoch},
            {"best_validation_rmse", best_epoch ? nlohmann::json(best_validation_rmse()) : nlohmann::json(nullptr)},
            {"stop_reason", to_string(stop)},
            {"epochs_to_convergence", best_epoch},
            {"epoch_seconds", epoch_seconds},
            {"total_seconds", total_seconds}};
  }
};

/// The early-stopping loop on its own. `run_epoch(e)` trains epoch e (1-based) and
/// returns the validation loss; `keep_best(e)` is called whenever epoch e becomes the
/// best so far. A non-finite loss ends the loop with StopReason::Diverged.
inline StopReason run_early_stopped(std::size_t max_epochs, std::size_t patience,
                                    const std::function<double(std::size_t)>& run_epoch,
                                    const std::function<void(std::size_t)>& keep_best, EarlyStopping* out = nullptr) {
  EarlyStopping es(patience);
  StopReason reason = StopReason::MaxEpochs;
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    double loss = run_epoch(e);
    if (!std::isfinite(loss)) {
      reason = StopReason::Diverged;
      break;
    }
    bool stop = es.update(loss);
    if (es.improved_last()) keep_best(e);
    if (stop) {
      reason = StopReason::EarlyStop;
      break;
    }
  }
  if (out) *out = es;
  return reason;
}

/// Pooled RMSE in vehicles of a network over normalised samples.
inline double validation_rmse(const Network& net, const std::vector<WindowSample>& samples, const NormStats& st) {
  double s = 0;
  std::size_t n = 0;
  std::vector<double> y(net.stations());
  for (const auto& w : samples) {
    net.predict(w.input, y);
    for (std::size_t j = 0; j < y.size(); ++j) {
      double d = st.inverse(j, y[j]) - st.inverse(j, w.target[j]);
      s += d * d;
      ++n;
    }
  }
  return std::sqrt(s / static_cast<double>(n));
}

struct TrainResult {
  std::unique_ptr<NeuralForecaster> model;  // best-epoch snapshot
  TrainReport report;
};

/// Mini-batch training with early stopping on validation RMSE. Samples are raw
/// (vehicle) windows; normalisation is fitted on `train` only.
inline TrainResult train(const ModelConfig& mcfg, const std::vector<WindowSample>& train_raw,
                         const std::vector<WindowSample>& val_raw, const TrainConfig& cfg) {
  cfg.validate();
  mcfg.validate();
  if (train_raw.empty() || val_raw.empty()) throw DataError("training and validation sets must be non-empty");
  for (const auto* set : {&train_raw, &val_raw})
    if (set->front().stations != mcfg.stations || set->front().past != mcfg.R)
      throw ShapeError("samples do not match the model configuration");

  const auto stats = fit_stats(train_raw);
  const auto train_set = normalize(train_raw, stats);
  const auto val_set = normalize(val_raw, stats);

  auto net = make_network(mcfg);
  auto params = net->parameters();
  std::unique_ptr<nn::Adam> adam;
  std::unique_ptr<nn::Sgd> sgd;
  if (cfg.use_sgd)
    sgd = std::make_unique<nn::Sgd>(params, cfg.learning_rate, cfg.l2);
  else
    adam = std::make_unique<nn::Adam>(params, nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.l2});

  TrainReport rep;
  rep.arch = to_string(mcfg.arch);
  nn::ParamSnapshot best = nn::snapshot(params);
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t n = train_set.size();

  auto ckpt_path = [&](std::size_t e) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%03zu.json", e);
    return std::filesystem::path(*cfg.checkpoint_dir) / buf;
  };
  if (cfg.checkpoint_dir) std::filesystem::create_directories(*cfg.checkpoint_dir);

  auto run_epoch = [&](std::size_t epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = epoch_order(n, sub_seed(cfg.seed, "shuffle"), epoch);
    double loss_sum = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(e - b);
      nn::zero_grads(params);
      for (std::size_t k = b; k < e; ++k) {
        const auto& s = train_set[order[k]];
        // batch loss = mean of per-sample MSE
        loss_sum += net->backprop(s.input, [&](std::span<const double> y, std::span<double> dy) {
          double L = nn::mse_loss(y, s.target, dy);
          for (auto& g : dy) g *= scale;
          return L;
        }, {});
      }
      if (adam)
        adam->step();
      else
        sgd->step();
    }
    double train_loss = loss_sum / static_cast<double>(n);
    double val = std::isfinite(train_loss) ? validation_rmse(*net, val_set, stats)
                                           : std::numeric_limits<double>::quiet_NaN();
    rep.train_loss.push_back(train_loss);
    rep.validation_rmse.push_back(val);
    rep.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (cfg.checkpoint_dir && std::isfinite(val)) {
      NeuralForecaster snap(mcfg, net->clone(), stats);
      save_forecaster(snap, ckpt_path(epoch).string());
    }
    return val;
  };

  EarlyStopping es(cfg.patience);
  rep.stop = run_early_stopped(cfg.max_epochs, cfg.patience, run_epoch,
                               [&](std::size_t) { best = nn::snapshot(params); }, &es);
  rep.best_epoch = es.best_epoch();
  rep.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (cfg.checkpoint_dir) {
    for (std::size_t e = 1; e <= rep.epochs(); ++e)
      if (e != rep.best_epoch) std::filesystem::remove(ckpt_path(e));
  }

  nn::restore(params, best);
  return {std::make_unique<NeuralForecaster>(mcfg, std::move(net), stats), std::move(rep)};
}

struct RepeatedTraining {
  std::vector<TrainResult> runs;
  double mean_validation_rmse = 0, std_validation_rmse = 0;
  double mean_seconds = 0, std_seconds = 0;
  std::size_t diverged = 0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  // sample standard deviation; 0 for a single run
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

/// Seed used for repeat k of a run with base seed `seed`.
inline std::uint64_t repeat_seed(std::uint64_t seed, std::size_t k) { return sub_seed(seed, "repeat", k); }

/// k independent trainings (distinct seeds for initialisation and shuffling).
/// Aggregates exclude diverged runs.
inline RepeatedTraining train_repeated(ModelConfig mcfg, const std::vector<WindowSample>& train_raw,
                                       const std::vector<WindowSample>& val_raw, TrainConfig cfg, std::size_t k) {
  if (k < 1) throw ConfigError("need at least one repeat");
  RepeatedTraining out;
  std::vector<double> rmse, secs;
  const auto base_model_seed = mcfg.seed, base_train_seed = cfg.seed;
  for (std::size_t r = 0; r < k; ++r) {
    mcfg.seed = k == 1 ? base_model_seed : repeat_seed(base_model_seed, r);
    cfg.seed = k == 1 ? base_train_seed : repeat_seed(base_train_seed, r);
    auto res = train(mcfg, train_raw, val_raw, cfg);
    if (res.report.stop == StopReason::Diverged || res.report.best_epoch == 0) {
      ++out.diverged;
    } else {
      rmse.push_back(res.report.best_validation_rmse());
      secs.push_back(res.report.total_seconds);
    }
    out.runs.push_back(std::move(res));
  }
  std::tie(out.mean_validation_rmse, out.std_validation_rmse) = mean_std(rmse);
  std::tie(out.mean_seconds, out.std_seconds) = mean_std(secs);
  return out;
}

}  // namespace mflow
