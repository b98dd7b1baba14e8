#pragma once

#include <cstddef>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/dataset.hpp"
#include "mflow/error.hpp"
#include "mflow/models/arima.hpp"
#include "mflow/models/networks.hpp"
#include "mflow/numcore/serialize.hpp"
#include "mflow/profiling.hpp"

namespace mflow {

/// Common prediction interface, in vehicles: given a raw window X^t, the N-vector
/// for TI t+P. Frozen forecasters are safe to share across threads.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual Arch arch() const = 0;
  virtual std::size_t stations() const = 0;
  /// History needed per sample; 0 when the forecaster does not read the window.
  virtual std::size_t past() const = 0;
  virtual std::vector<double> predict(const WindowSample& raw) const = 0;
  virtual nlohmann::json to_json() const = 0;

  std::string tag() const { return to_string(arch()); }
};

/// Neural network plus the normalisation it was trained with.
class NeuralForecaster final : public Forecaster {
 public:
  NeuralForecaster(ModelConfig cfg, std::unique_ptr<Network> net, NormStats stats)
      : cfg_(std::move(cfg)), net_(std::move(net)), stats_(std::move(stats)) {
    if (stats_.stations() != net_->stations()) throw ShapeError("normalisation stats do not match network");
  }

  Arch arch() const override { return net_->arch(); }
  std::size_t stations() const override { return net_->stations(); }
  std::size_t past() const override { return net_->past(); }
  const ModelConfig& config() const { return cfg_; }
  const NormStats& stats() const { return stats_; }
  Network& network() { return *net_; }
  const Network& network() const { return *net_; }

  std::vector<double> predict(const WindowSample& raw) const override {
    if (raw.horizon != cfg_.P)
      throw ConfigError(tag() + " model was trained for P=" + std::to_string(cfg_.P) + ", asked for P=" +
                        std::to_string(raw.horizon));
    if (raw.stations != stations() || raw.past != past())
      throw ShapeError("window is " + std::to_string(raw.stations) + "x" + std::to_string(raw.past) +
                       ", model expects " + std::to_string(stations()) + "x" + std::to_string(past()));
    std::vector<double> x(raw.input.size());
    for (std::size_t j = 0; j < raw.stations; ++j)
      for (std::size_t c = 0; c < raw.past; ++c) x[j * raw.past + c] = stats_.forward(j, raw.at(j, c));
    auto y = net_->predict(x);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = stats_.inverse(j, y[j]);
    return y;
  }

  nlohmann::json to_json() const override {
    return {{"arch", tag()},
            {"config", cfg_.to_json()},
            {"norm", stats_.to_json()},
            {"params", nn::params_to_json(const_cast<Network&>(*net_).parameters())}};
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<Network> net_;
  NormStats stats_;
};

/// Daily-profile predictor: the profile mean at the target's (day of week, TI).
/// Ignores the window, so its predictions do not depend on R or P.
class DppForecaster final : public Forecaster {
 public:
  explicit DppForecaster(std::vector<DailyProfile> profiles) : profiles_(std::move(profiles)) {}

  Arch arch() const override { return Arch::Dpp; }
  std::size_t stations() const override { return profiles_.size(); }
  std::size_t past() const override { return 0; }
  const std::vector<DailyProfile>& profiles() const { return profiles_; }

  /// Profile mean at the target's cell. An empty cell (every training sample masked)
  /// borrows the nearest populated TI of the same weekday, earlier side first.
  double predict_at(Minutes target, std::size_t station) const {
    const auto& p = profiles_.at(station);
    const int d = day_of_week(target), i = interval_of_day(target);
    for (int k = 0; k < kIntervalsPerDay / 2 + 1; ++k)
      for (int s : {-k, k}) {
        int j = ((i + s) % kIntervalsPerDay + kIntervalsPerDay) % kIntervalsPerDay;
        if (!p.cell(d, j).empty()) return p.cell(d, j).mean;
      }
    throw DataError("daily profile of " + p.station.render() + " has no samples on " + format_timestamp(target).substr(0, 10) +
                    "'s weekday");
  }

  std::vector<double> predict_at(Minutes target) const {
    std::vector<double> y(stations());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = predict_at(target, j);
    return y;
  }

  std::vector<double> predict(const WindowSample& raw) const override { return predict_at(raw.target_time()); }

  nlohmann::json to_json() const override {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& p : profiles_) {
      std::vector<double> mean(p.cells.size());
      std::vector<int> count(p.cells.size());
      for (std::size_t i = 0; i < p.cells.size(); ++i) {
        mean[i] = p.cells[i].empty() ? 0.0 : p.cells[i].mean;
        count[i] = p.cells[i].count;
      }
      st.push_back({{"station", p.station.render()}, {"mean", mean}, {"count", count}});
    }
    return {{"arch", "dpp"}, {"profiles", st}};
  }

  static DppForecaster from_json(const nlohmann::json& j) {
    std::vector<DailyProfile> ps;
    for (const auto& s : j.at("profiles")) {
      DailyProfile p;
      p.station = StationId::parse(s.at("station").get<std::string>());
      auto mean = s.at("mean").get<std::vector<double>>();
      auto count = s.at("count").get<std::vector<int>>();
      if (mean.size() != p.cells.size() || count.size() != p.cells.size())
        throw SchemaError("dpp profile must have 7*480 cells");
      for (std::size_t i = 0; i < mean.size(); ++i)
        if (count[i] > 0) {
          p.cells[i].mean = mean[i];
          p.cells[i].count = count[i];
        }
      ps.push_back(std::move(p));
    }
    return DppForecaster(std::move(ps));
  }

 private:
  std::vector<DailyProfile> profiles_;
};

/// Per-station ARIMA refitted on each window's history (rolling origin) and rolled
/// forward to the window's horizon, so one instance serves every P.
class ArimaForecaster final : public Forecaster {
 public:
  explicit ArimaForecaster(std::size_t stations, ArimaParams cfg = {}) : N_(stations), cfg_(std::move(cfg)) {}

  Arch arch() const override { return Arch::Arima; }
  std::size_t stations() const override { return N_; }
  std::size_t past() const override { return cfg_.max_history; }
  const ArimaParams& params() const { return cfg_; }

  std::vector<double> predict(const WindowSample& raw) const override {
    if (raw.stations != N_) throw ShapeError("window station count does not match ARIMA model");
    std::vector<double> y(N_);
    for (std::size_t j = 0; j < N_; ++j) {
      std::span<const double> row(raw.input.data() + j * raw.past, raw.past);
      auto fit = arima_fit(row, cfg_);
      // counts are non-negative; a rolled AR forecast can dip below zero
      y[j] = std::max(0.0, arima_predict(fit, row, raw.horizon));
    }
    return y;
  }

  nlohmann::json to_json() const override {
    return {{"arch", "arima"}, {"stations", N_}, {"arima", cfg_.to_json()}};
  }

 private:
  std::size_t N_;
  ArimaParams cfg_;
};

inline std::unique_ptr<Forecaster> forecaster_from_json(const nlohmann::json& j) {
  try {
    Arch a = parse_arch(j.at("arch").get<std::string>());
    if (a == Arch::Dpp) return std::make_unique<DppForecaster>(DppForecaster::from_json(j));
    if (a == Arch::Arima)
      return std::make_unique<ArimaForecaster>(j.at("stations").get<std::size_t>(),
                                               ArimaParams::from_json(j.at("arima")));
    ModelConfig cfg;
    cfg.merge_json(j.at("config"));
    auto net = make_network(cfg);
    nn::params_from_json(net->parameters(), j.at("params"));
    return std::make_unique<NeuralForecaster>(cfg, std::move(net), NormStats::from_json(j.at("norm")));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
}

inline void save_forecaster(const Forecaster& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << f.to_json().dump() << "\n";
}

inline std::unique_ptr<Forecaster> load_forecaster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return forecaster_from_json(j);
}

}  // namespace mflow
