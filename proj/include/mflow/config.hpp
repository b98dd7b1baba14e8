#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/dataset.hpp"
#include "mflow/error.hpp"
#include "mflow/evaluation.hpp"
#include "mflow/models/networks.hpp"
#include "mflow/synthgen.hpp"
#include "mflow/training.hpp"

namespace mflow {

// Run configuration file: one JSON object with optional sections
//   generator, split, train, model, sweep, validate
// Unknown keys are rejected so that typos do not silently fall back to defaults.

namespace detail {
inline void check_keys(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw SchemaError(section + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw SchemaError("unknown key '" + k + "' in " + section);
  }
}
}  // namespace detail

struct GeneratorSection {
  GeneratorConfig cfg;
  int mainline = 10;   // per direction, when no topology file is given
  int ramp_every = 2;
  std::optional<std::string> topology_file;
};

inline GeneratorSection generator_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "generator",
                     {"seed", "weeks", "start", "mainline", "ramp_every", "topology", "am_peak", "pm_peak",
                      "weekend_peak", "floor", "day_level", "weekend_day_level", "peak_width_minutes",
                      "weekend_width_minutes", "noise_sigma",
                      "sensor_share", "demand_correlation", "exit_fraction_min", "exit_fraction_max",
                      "entry_fraction_min", "entry_fraction_max", "missing_rate", "mean_run_length", "holidays",
                      "capacity"});
  GeneratorSection g;
  auto& c = g.cfg;
  try {
    c.seed = j.value("seed", c.seed);
    c.weeks = j.value("weeks", c.weeks);
    if (j.contains("start")) c.start = parse_date(j.at("start").get<std::string>());
    g.mainline = j.value("mainline", g.mainline);
    g.ramp_every = j.value("ramp_every", g.ramp_every);
    if (j.contains("topology")) g.topology_file = j.at("topology").get<std::string>();
    c.am_peak = j.value("am_peak", c.am_peak);
    c.pm_peak = j.value("pm_peak", c.pm_peak);
    c.weekend_peak = j.value("weekend_peak", c.weekend_peak);
    c.floor = j.value("floor", c.floor);
    c.day_level = j.value("day_level", c.day_level);
    c.weekend_day_level = j.value("weekend_day_level", c.weekend_day_level);
    c.peak_width_minutes = j.value("peak_width_minutes", c.peak_width_minutes);
    c.weekend_width_minutes = j.value("weekend_width_minutes", c.weekend_width_minutes);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.sensor_share = j.value("sensor_share", c.sensor_share);
    c.demand_correlation = j.value("demand_correlation", c.demand_correlation);
    c.exit_fraction_min = j.value("exit_fraction_min", c.exit_fraction_min);
    c.exit_fraction_max = j.value("exit_fraction_max", c.exit_fraction_max);
    c.entry_fraction_min = j.value("entry_fraction_min", c.entry_fraction_min);
    c.entry_fraction_max = j.value("entry_fraction_max", c.entry_fraction_max);
    c.missing_rate = j.value("missing_rate", c.missing_rate);
    c.mean_run_length = j.value("mean_run_length", c.mean_run_length);
    c.capacity = j.value("capacity", c.capacity);
    if (j.contains("holidays"))
      for (const auto& h : j.at("holidays")) c.holidays.push_back(parse_date(h.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("generator: ") + e.what());
  }
  return g;
}

inline nlohmann::json generator_to_json(const GeneratorSection& g) {
  const auto& c = g.cfg;
  nlohmann::json hol = nlohmann::json::array();
  for (auto d : c.holidays) hol.push_back(format_date(d));
  nlohmann::json j{{"seed", c.seed},
                   {"weeks", c.weeks},
                   {"start", format_date(c.start)},
                   {"mainline", g.mainline},
                   {"ramp_every", g.ramp_every},
                   {"am_peak", c.am_peak},
                   {"pm_peak", c.pm_peak},
                   {"weekend_peak", c.weekend_peak},
                   {"floor", c.floor},
                   {"day_level", c.day_level},
                   {"weekend_day_level", c.weekend_day_level},
                   {"peak_width_minutes", c.peak_width_minutes},
                   {"weekend_width_minutes", c.weekend_width_minutes},
                   {"noise_sigma", c.noise_sigma},
                   {"sensor_share", c.sensor_share},
                   {"demand_correlation", c.demand_correlation},
                   {"exit_fraction_min", c.exit_fraction_min},
                   {"exit_fraction_max", c.exit_fraction_max},
                   {"entry_fraction_min", c.entry_fraction_min},
                   {"entry_fraction_max", c.entry_fraction_max},
                   {"missing_rate", c.missing_rate},
                   {"mean_run_length", c.mean_run_length},
                   {"holidays", hol},
                   {"capacity", c.capacity}};
  if (g.topology_file) j["topology"] = *g.topology_file;
  return j;
}

/// Split given either as explicit ranges or as week counts from the start of the data.
struct SplitSection {
  std::optional<SplitSpec> explicit_split;
  int train_weeks = -1;  // -1: all weeks but the last two
  int validation_weeks = 1, test_weeks = 1;

  SplitSpec resolve(const SeriesSet& data) const {
    if (explicit_split) return *explicit_split;
    Date first = date_of(data.start());
    int total = static_cast<int>(data.length() / (7 * kIntervalsPerDay));
    int tw = train_weeks >= 0 ? train_weeks : total - validation_weeks - test_weeks;
    if (tw < 1 || tw + validation_weeks + test_weeks > total)
      throw ConfigError("data has " + std::to_string(total) + " full weeks, split needs " +
                        std::to_string(std::max(tw, 1) + validation_weeks + test_weeks));
    return SplitSpec::consecutive_weeks(first, tw, validation_weeks, test_weeks);
  }
};

inline SplitSection split_from_json(const nlohmann::json& j) {
  SplitSection s;
  if (j.contains("train")) {
    detail::check_keys(j, "split", {"train", "validation", "test"});
    s.explicit_split = SplitSpec::from_json(j);
    return s;
  }
  detail::check_keys(j, "split", {"train_weeks", "validation_weeks", "test_weeks"});
  s.train_weeks = j.value("train_weeks", s.train_weeks);
  s.validation_weeks = j.value("validation_weeks", s.validation_weeks);
  s.test_weeks = j.value("test_weeks", s.test_weeks);
  if (s.validation_weeks < 1 || s.test_weeks < 1) throw ConfigError("validation and test need at least one week");
  return s;
}

inline nlohmann::json split_to_json(const SplitSection& s) {
  if (s.explicit_split) return s.explicit_split->to_json();
  return {{"train_weeks", s.train_weeks}, {"validation_weeks", s.validation_weeks}, {"test_weeks", s.test_weeks}};
}

struct SweepSection {
  std::vector<std::size_t> Rs{1, 3, 6, 12, 24};
  std::vector<std::size_t> Ps{1, 5, 10};
  std::size_t repeats = 5;
};

struct RunConfig {
  GeneratorSection generator;
  SplitSection split;
  TrainConfig train;
  ModelConfig model;
  SweepSection sweep;
  std::optional<double> epsilon;  // validate-topology; default 3 * generator noise sigma
  double min_pass_rate = 0.99;

  static RunConfig from_json(const nlohmann::json& j) {
    detail::check_keys(j, "config", {"generator", "split", "train", "model", "sweep", "validate"});
    RunConfig c;
    try {
      if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"));
      if (j.contains("split")) c.split = split_from_json(j.at("split"));
      if (j.contains("train")) {
        detail::check_keys(j.at("train"), "train",
                           {"batch_size", "learning_rate", "l2", "patience", "max_epochs", "seed", "optimizer"});
        c.train.merge_json(j.at("train"));
      }
      if (j.contains("model")) {
        detail::check_keys(j.at("model"), "model",
                           {"arch", "R", "P", "bpnn_hidden", "sep_hidden", "cnn_channels1", "cnn_channels2",
                            "cnn_kernel", "lstm_hidden", "cnn_lstm_channels", "cnn_lstm_kernel", "seed"});
        c.model.merge_json(j.at("model"));
      }
      if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::check_keys(s, "sweep", {"R", "P", "repeats"});
        c.sweep.Rs = s.value("R", c.sweep.Rs);
        c.sweep.Ps = s.value("P", c.sweep.Ps);
        c.sweep.repeats = s.value("repeats", c.sweep.repeats);
      }
      if (j.contains("validate")) {
        const auto& v = j.at("validate");
        detail::check_keys(v, "validate", {"epsilon", "min_pass_rate"});
        if (v.contains("epsilon")) c.epsilon = v.at("epsilon").get<double>();
        c.min_pass_rate = v.value("min_pass_rate", c.min_pass_rate);
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("config: ") + e.what());
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path + ": " + e.what());
    }
    return from_json(j);
  }

  double effective_epsilon() const { return epsilon ? *epsilon : 3.0 * generator.cfg.noise_sigma; }

  nlohmann::json to_json() const {
    auto m = model.to_json();
    m.erase("stations");
    nlohmann::json v{{"epsilon", effective_epsilon()}, {"min_pass_rate", min_pass_rate}};
    return {{"generator", generator_to_json(generator)},
            {"split", split_to_json(split)},
            {"train", train.to_json()},
            {"model", m},
            {"sweep", {{"R", sweep.Rs}, {"P", sweep.Ps}, {"repeats", sweep.repeats}}},
            {"validate", v}};
  }
};

}  // namespace mflow
