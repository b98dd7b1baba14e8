#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mflow/dataset.hpp"
#include "mflow/error.hpp"
#include "mflow/models/forecaster.hpp"
#include "mflow/profiling.hpp"
#include "mflow/training.hpp"

namespace mflow {

// ---------------------------------------------------------------------------
// Metrics. All of them pool every (station, TI) residual.

namespace detail {
inline void check_metric_input(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("metric inputs differ in length");
  if (pred.empty()) throw DataError("metric of an empty set");
}
}  // namespace detail

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth);
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double mae(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth);
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

/// 200 * |f - f^| / (|f| + |f^|) averaged over points; 0/0 terms count as 0. Range [0, 200].
inline double smape(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth);
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double den = std::abs(truth[i]) + std::abs(pred[i]);
    // rounding can push a term a hair past 200 when signs differ
    if (den > 0) s += std::min(200.0, 200.0 * std::abs(truth[i] - pred[i]) / den);
  }
  return std::min(200.0, s / static_cast<double>(pred.size()));
}

struct MetricReport {
  std::string model;
  std::size_t R = 0;
  std::size_t P = 0;
  std::string dataset;
  double rmse = 0, mae = 0, smape = 0;
  std::size_t points = 0;
  std::vector<double> station_rmse;
};

struct Predictions {
  std::vector<double> predicted, observed;  // pooled, sample-major
  std::size_t samples = 0;
};

/// Every target TI of `range` with a usable window. Forecasters that read no history
/// are scored on every unmasked TI of the range, whatever P is; the others on the
/// n - R - P + 1 windows of the range.
inline Predictions predict_range(const Forecaster& f, const SeriesSet& data, const DateRange& range, std::size_t P) {
  if (data.stations() != f.stations())
    throw ShapeError("model has " + std::to_string(f.stations()) + " stations, data has " +
                     std::to_string(data.stations()));
  Predictions out;
  auto add = [&](const WindowSample& w) {
    auto y = f.predict(w);
    out.predicted.insert(out.predicted.end(), y.begin(), y.end());
    out.observed.insert(out.observed.end(), w.target.begin(), w.target.end());
    ++out.samples;
  };
  if (f.past() == 0) {
    auto [b, e] = interval_span(data, range);
    for (std::size_t t = b; t < e; ++t) {
      WindowSample w;
      w.stations = data.stations();
      w.horizon = P;
      w.anchor_time = data.time_at(t) - Minutes(P) * kIntervalMinutes;
      w.target.resize(w.stations);
      bool ok = true;
      for (std::size_t j = 0; j < w.stations && ok; ++j) {
        ok = !data.series[j].missing[t];
        w.target[j] = data.series[j].values[t];
      }
      if (ok) add(w);
    }
  } else {
    for (const auto& w : make_windows(data, f.past(), P, range).samples) add(w);
  }
  return out;
}

inline MetricReport score(const Predictions& p, std::size_t stations) {
  MetricReport m;
  m.points = p.predicted.size();
  m.rmse = rmse(p.predicted, p.observed);
  m.mae = mae(p.predicted, p.observed);
  m.smape = smape(p.predicted, p.observed);
  m.station_rmse.assign(stations, 0.0);
  for (std::size_t i = 0; i < p.predicted.size(); ++i) {
    double d = p.predicted[i] - p.observed[i];
    m.station_rmse[i % stations] += d * d;
  }
  for (auto& v : m.station_rmse) v = std::sqrt(v / static_cast<double>(p.samples));
  return m;
}

inline MetricReport evaluate(const Forecaster& f, const SeriesSet& data, const DateRange& range, std::size_t P,
                             const std::string& dataset = "test") {
  auto p = predict_range(f, data, range, P);
  if (p.samples == 0) throw DataError("no usable samples to evaluate " + f.tag() + " on " + dataset);
  auto m = score(p, data.stations());
  m.model = f.tag();
  m.R = f.past();
  m.P = P;
  m.dataset = dataset;
  return m;
}

// ---------------------------------------------------------------------------
// Residuals over one day

struct ResidualSeries {
  StationId station;
  Date day;
  std::size_t P = 1;
  std::vector<Minutes> times;
  std::vector<double> observed, predicted, residual;  // residual = predicted - observed
  /// max |residual| / observed over the AM (08:00-10:00) and PM (17:00-20:00) peaks
  double peak_max_relative_error = std::numeric_limits<double>::quiet_NaN();
};

inline bool in_peak_window(Minutes t) {
  int m = interval_of_day(t) * kIntervalMinutes;
  return (m >= 8 * 60 && m < 10 * 60) || (m >= 17 * 60 && m < 20 * 60);
}

/// Observed vs predicted flow of one station for every TI of `day`. Windows may reach
/// back into the previous day; TIs without a usable window get NaN.
inline ResidualSeries residual_series(const Forecaster& f, const SeriesSet& data, std::size_t station, Date day,
                                      std::size_t P) {
  if (station >= data.stations()) throw DataError("station index out of range");
  auto [b, e] = interval_span(data, DateRange{day, day});
  ResidualSeries r;
  r.station = data.series[station].station;
  r.day = day;
  r.P = P;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double worst = -1;
  for (std::size_t t = b; t < e; ++t) {
    r.times.push_back(data.time_at(t));
    double obs = data.series[station].missing[t] ? nan : data.series[station].values[t];
    double pred = nan;
    if (auto w = window_for_target(data, t, f.past(), P)) pred = f.predict(*w)[station];
    r.observed.push_back(obs);
    r.predicted.push_back(pred);
    r.residual.push_back(pred - obs);
    if (in_peak_window(data.time_at(t)) && std::isfinite(pred) && std::isfinite(obs) && obs > 0)
      worst = std::max(worst, std::abs(pred - obs) / obs);
  }
  if (worst >= 0) r.peak_max_relative_error = worst;
  return r;
}

// ---------------------------------------------------------------------------
// R x P sweep

struct SweepCell {
  std::size_t R = 0, P = 0;
  std::vector<double> validation_rmse;  // per finished repeat
  std::vector<double> test_rmse;
  std::vector<double> seconds;
  std::size_t diverged = 0;
  double mean_validation = std::numeric_limits<double>::quiet_NaN();
  double std_validation = std::numeric_limits<double>::quiet_NaN();
  double mean_test = std::numeric_limits<double>::quiet_NaN();
  double std_test = std::numeric_limits<double>::quiet_NaN();

  bool usable() const { return std::isfinite(mean_validation); }

  void aggregate() {
    std::tie(mean_validation, std_validation) = mean_std(validation_rmse);
    std::tie(mean_test, std_test) = mean_std(test_rmse);
  }
};

struct SweepResult {
  std::string arch;
  std::vector<std::size_t> Rs, Ps;
  std::vector<SweepCell> cells;            // P-major, then R
  std::map<std::size_t, std::size_t> best_r;  // P -> R

  const SweepCell& cell(std::size_t R, std::size_t P) const {
    for (const auto& c : cells)
      if (c.R == R && c.P == P) return c;
    throw DataError("no sweep cell for R=" + std::to_string(R) + " P=" + std::to_string(P));
  }
};

/// For every P, the R with the lowest mean validation RMSE; ties go to the smaller R.
/// Cells without a usable mean (all repeats diverged) are skipped.
inline std::map<std::size_t, std::size_t> select_best_r(const std::vector<SweepCell>& cells) {
  std::map<std::size_t, std::pair<double, std::size_t>> best;
  for (const auto& c : cells) {
    if (!c.usable()) continue;
    auto it = best.find(c.P);
    if (it == best.end() || c.mean_validation < it->second.first ||
        (c.mean_validation == it->second.first && c.R < it->second.second))
      best[c.P] = {c.mean_validation, c.R};
  }
  std::map<std::size_t, std::size_t> out;
  for (const auto& [P, v] : best) out[P] = v.second;
  return out;
}

struct SweepOptions {
  std::vector<std::size_t> Rs{1, 3, 6, 12, 24};
  std::vector<std::size_t> Ps{1, 5, 10};
  std::size_t repeats = 5;
  std::size_t workers = 1;
  /// Called after each finished task (R, P, repeat); serialised by the sweep.
  std::function<void(std::size_t, std::size_t, std::size_t, double)> on_task;
};

/// Trains every (R, P, repeat) of the grid, a bounded pool of workers pulling tasks.
/// Each task's seeds derive from (base seed, repeat index) only, so the result does
/// not depend on scheduling. DPP and ARIMA are evaluated directly (one repeat).
inline SweepResult sweep(const SeriesSet& data, const SplitSpec& split, const ModelConfig& base,
                         const TrainConfig& tcfg, const SweepOptions& opt,
                         const std::vector<DailyProfile>* dpp_profiles = nullptr) {
  if (opt.Rs.empty() || opt.Ps.empty()) throw ConfigError("sweep grids must be non-empty");
  if (opt.repeats < 1) throw ConfigError("sweep needs at least one repeat");
  SweepResult res;
  res.arch = to_string(base.arch);
  res.Rs = opt.Rs;
  res.Ps = opt.Ps;
  for (auto P : opt.Ps)
    for (auto R : opt.Rs) {
      SweepCell c;
      c.R = R;
      c.P = P;
      res.cells.push_back(std::move(c));
    }

  const bool neural = is_neural(base.arch);
  const std::size_t reps = neural ? opt.repeats : 1;
  struct Task {
    std::size_t cell, repeat;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < res.cells.size(); ++c)
    for (std::size_t r = 0; r < reps; ++r) tasks.push_back({c, r});

  struct Outcome {
    bool ok = false;
    double val = 0, test = 0, seconds = 0;
  };
  std::vector<Outcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex cb_mutex;
  std::exception_ptr failure;

  auto run_task = [&](std::size_t i) {
    const auto& cell = res.cells[tasks[i].cell];
    Outcome o;
    if (neural) {
      ModelConfig m = base;
      m.R = cell.R;
      m.P = cell.P;
      m.stations = data.stations();
      TrainConfig t = tcfg;
      m.seed = repeat_seed(base.seed, tasks[i].repeat);
      t.seed = repeat_seed(tcfg.seed, tasks[i].repeat);
      t.checkpoint_dir.reset();
      auto w = make_split_windows(data, cell.R, cell.P, split);
      try {
        auto tr = train(m, w.train.samples, w.validation.samples, t);
        if (tr.report.stop != StopReason::Diverged && tr.report.best_epoch > 0) {
          o.ok = true;
          o.val = tr.report.best_validation_rmse();
          o.seconds = tr.report.total_seconds;
          o.test = evaluate(*tr.model, data, split.test, cell.P).rmse;
        }
      } catch (const DivergenceError&) {
        o.ok = false;
      }
    } else {
      std::unique_ptr<Forecaster> f;
      if (base.arch == Arch::Dpp) {
        if (!dpp_profiles) throw ConfigError("DPP sweep needs training-period profiles");
        f = std::make_unique<DppForecaster>(*dpp_profiles);
      } else {
        f = std::make_unique<ArimaForecaster>(data.stations());
      }
      o.ok = true;
      o.val = evaluate(*f, data, split.validation, cell.P, "validation").rmse;
      o.test = evaluate(*f, data, split.test, cell.P).rmse;
    }
    outcomes[i] = o;
    if (opt.on_task) {
      std::lock_guard lock(cb_mutex);
      opt.on_task(cell.R, cell.P, tasks[i].repeat, o.ok ? o.val : std::numeric_limits<double>::quiet_NaN());
    }
  };

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        run_task(i);
      } catch (...) {
        std::lock_guard lock(cb_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };

  const std::size_t nw = std::max<std::size_t>(1, std::min(opt.workers, tasks.size()));
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < nw; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // single-writer merge, in task order
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto& cell = res.cells[tasks[i].cell];
    const auto& o = outcomes[i];
    if (!o.ok) {
      ++cell.diverged;
      continue;
    }
    cell.validation_rmse.push_back(o.val);
    cell.test_rmse.push_back(o.test);
    cell.seconds.push_back(o.seconds);
  }
  for (auto& c : res.cells) c.aggregate();
  res.best_r = select_best_r(res.cells);
  return res;
}

// ---------------------------------------------------------------------------
// Congestion map

struct CongestionMap {
  int day_of_week = 0;
  double capacity = 1;
  std::vector<StationId> stations;
  std::vector<std::vector<double>> ratio;  // station x 480, in [0,1]
};

/// Flow / capacity of each profile mean for one day of the week, clipped to [0,1].
/// Empty profile cells map to 0.
inline CongestionMap congestion_map(const std::vector<DailyProfile>& profiles, double capacity, int dow = 0) {
  if (!(capacity > 0)) throw ConfigError("capacity must be positive");
  if (dow < 0 || dow > 6) throw ConfigError("day of week must be in 0..6");
  CongestionMap m;
  m.day_of_week = dow;
  m.capacity = capacity;
  for (const auto& p : profiles) {
    m.stations.push_back(p.station);
    std::vector<double> row(kIntervalsPerDay);
    for (int i = 0; i < kIntervalsPerDay; ++i) {
      const auto& c = p.cell(dow, i);
      row[i] = c.empty() ? 0.0 : std::clamp(c.mean / capacity, 0.0, 1.0);
    }
    m.ratio.push_back(std::move(row));
  }
  return m;
}

}  // namespace mflow
