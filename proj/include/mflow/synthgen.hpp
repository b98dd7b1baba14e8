#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/random.hpp"
#include "mflow/series.hpp"
#include "mflow/time.hpp"
#include "mflow/topology.hpp"

namespace mflow {

// Synthetic motorway data.
//
// Each direction has one source profile at its first mainline station. Ramp flows are
// fixed fractions of the mainline flow just upstream of them and every downstream
// mainline flow follows from the conservation equations, so the noiseless signal is
// conservative by construction. Values live on a 1/16 vehicle grid, which keeps the
// additions in the conservation checks exact in binary floating point.
//
// Noise has two parts:
//   * demand: an AR(1) process per direction that scales the whole direction, with std
//     sigma*sqrt(1-sensor_share) at the peak flow. It preserves conservation.
//   * sensor: independent Gaussian jitter per station, std sigma*sqrt(sensor_share) at the
//     source peak and shrinking like sqrt(flow) below it (count-like), so quiet ramps do
//     not read zero all the time.

inline constexpr double kFlowQuantum = 1.0 / 16.0;

inline double quantize_flow(double v) { return std::round(v / kFlowQuantum) * kFlowQuantum; }

struct GeneratorConfig {
  Topology topology;
  std::uint64_t seed = 1;
  int weeks = 4;
  Date start = make_date(2017, 2, 6);  // a Monday

  // Source-station profile, vehicles per TI.
  double am_peak = 100.0;       // centred 08:30
  double pm_peak = 110.0;       // centred 17:30
  double weekend_peak = 70.0;   // centred 13:30
  double floor = 6.0;
  double day_level = 30.0;          // daytime plateau, roughly 06:30-21:00
  double weekend_day_level = 20.0;
  double peak_width_minutes = 60.0;
  double weekend_width_minutes = 120.0;

  double noise_sigma = 4.0;
  double sensor_share = 0.25;
  double demand_correlation = 0.97;  // per TI

  double exit_fraction_min = 0.05, exit_fraction_max = 0.15;
  double entry_fraction_min = 0.05, entry_fraction_max = 0.15;

  double missing_rate = 0.0;
  double mean_run_length = 5.0;

  std::vector<Date> holidays;

  /// Nominal mainline capacity, veh/TI. Only the congestion map reads it.
  double capacity = 150.0;

  void validate() const {
    if (weeks < 1) throw ConfigError("weeks must be >= 1");
    for (double a : {am_peak, pm_peak, weekend_peak, floor, day_level, weekend_day_level})
      if (!(a >= 0) || !std::isfinite(a)) throw ConfigError("profile amplitudes must be non-negative");
    if (!(peak_width_minutes > 0) || !(weekend_width_minutes > 0))
      throw ConfigError("peak widths must be positive");
    if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be non-negative");
    if (!(sensor_share >= 0 && sensor_share <= 1)) throw ConfigError("sensor_share must be in [0,1]");
    if (!(demand_correlation >= 0 && demand_correlation < 1))
      throw ConfigError("demand_correlation must be in [0,1)");
    if (!(missing_rate >= 0 && missing_rate <= 1)) throw ConfigError("missing_rate must be in [0,1]");
    if (!(mean_run_length >= 1)) throw ConfigError("mean_run_length must be >= 1");
    if (!(exit_fraction_min >= 0 && exit_fraction_min <= exit_fraction_max && exit_fraction_max < 1))
      throw ConfigError("exit fractions must satisfy 0 <= min <= max < 1");
    if (!(entry_fraction_min >= 0 && entry_fraction_min <= entry_fraction_max))
      throw ConfigError("entry fractions must satisfy 0 <= min <= max");
    if (!(capacity > 0)) throw ConfigError("capacity must be positive");
    if (topology.station_count() == 0) throw ConfigError("generator needs a non-empty topology");
  }

  double sensor_sigma() const { return noise_sigma * std::sqrt(sensor_share); }
  double demand_sigma() const { return noise_sigma * std::sqrt(1.0 - sensor_share); }

  bool is_weekend_like(Date d) const {
    if (day_of_week(d) >= 5) return true;
    return std::find(holidays.begin(), holidays.end(), d) != holidays.end();
  }
};

/// Noiseless source-station flow for a direction at one TI.
inline double source_profile(const GeneratorConfig& cfg, StationKind direction, bool weekend_like,
                             int interval) {
  double minute = (interval + 0.5) * kIntervalMinutes;
  auto bump = [&](double centre, double width) {
    double z = (minute - centre) / width;
    return std::exp(-0.5 * z * z);
  };
  // smooth on/off around 06:30 and 21:00
  double day = 1.0 / (1.0 + std::exp(-(minute - 390.0) / 30.0)) / (1.0 + std::exp(-(1260.0 - minute) / 30.0));
  if (weekend_like)
    return cfg.floor + cfg.weekend_day_level * day + cfg.weekend_peak * bump(13.5 * 60, cfg.weekend_width_minutes);
  // North-bound traffic has the heavier morning peak.
  double am = direction == StationKind::MainlineB ? cfg.pm_peak : cfg.am_peak;
  double pm = direction == StationKind::MainlineB ? cfg.am_peak : cfg.pm_peak;
  return cfg.floor + cfg.day_level * day + am * bump(8.5 * 60, cfg.peak_width_minutes) +
         pm * bump(17.5 * 60, cfg.peak_width_minutes);
}

/// Ramp fraction of each link, drawn once per seed.
inline std::vector<double> ramp_fractions(const GeneratorConfig& cfg, const Direction& dir) {
  Rng rng(sub_seed(cfg.seed, std::string("ramps-") + kind_letter(dir.kind)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out;
  for (const auto& a : dir.links) {
    double r = u(rng);
    if (a.kind == AttachmentKind::Exit)
      out.push_back(cfg.exit_fraction_min + r * (cfg.exit_fraction_max - cfg.exit_fraction_min));
    else if (a.kind == AttachmentKind::Entry)
      out.push_back(cfg.entry_fraction_min + r * (cfg.entry_fraction_max - cfg.entry_fraction_min));
    else
      out.push_back(0.0);
  }
  return out;
}

struct CorruptedSeries {
  FlowSeries corrupted;
  FlowSeries original;
};

/// Zeroes geometric-length runs so that the expected masked fraction is `rate`.
/// A run starts at an unmasked TI with probability q = rate / (L(1-rate) + rate),
/// L the mean run length; this gives a stationary masked fraction of exactly `rate`.
inline CorruptedSeries inject_missing(const FlowSeries& series, double rate, double mean_run_length,
                                      std::uint64_t seed) {
  if (!(rate >= 0 && rate <= 1)) throw ConfigError("missing rate must be in [0,1]");
  if (!(mean_run_length >= 1)) throw ConfigError("mean run length must be >= 1");
  CorruptedSeries out{series, series};
  if (rate == 0) return out;
  double q = rate / (mean_run_length * (1 - rate) + rate);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::geometric_distribution<int> extra(1.0 / mean_run_length);
  std::size_t t = 0;
  while (t < series.size()) {
    if (u(rng) < q) {
      std::size_t len = 1 + static_cast<std::size_t>(extra(rng));
      for (std::size_t k = 0; k < len && t < series.size(); ++k, ++t) out.corrupted.set_missing(t);
    } else {
      ++t;
    }
  }
  return out;
}

struct GeneratedData {
  SeriesSet observed;  // noisy, with missing runs
  SeriesSet truth;     // noisy, before missing runs were injected
  SeriesSet clean;     // noiseless conservative signal
};

inline GeneratedData generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const auto& topo = cfg.topology;
  const std::size_t n_ti = static_cast<std::size_t>(cfg.weeks) * 7 * kIntervalsPerDay;
  const Minutes t0 = to_minutes(cfg.start);

  GeneratedData out;
  auto init = [&](SeriesSet& set) {
    for (const auto& s : topo.stations()) set.series.emplace_back(s, t0, std::vector<double>(n_ti, 0.0));
  };
  init(out.clean);
  init(out.truth);

  for (const auto& dir : topo.directions()) {
    // Peak of the noiseless source, used to scale demand noise.
    double peak = 0;
    for (int i = 0; i < kIntervalsPerDay; ++i)
      peak = std::max({peak, source_profile(cfg, dir.kind, false, i), source_profile(cfg, dir.kind, true, i)});
    if (peak <= 0) peak = 1;

    Rng rng(sub_seed(cfg.seed, std::string("demand-") + kind_letter(dir.kind)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double rho = cfg.demand_correlation;
    const double innov = std::sqrt(1 - rho * rho);
    double z = gauss(rng);
    const auto fractions = ramp_fractions(cfg, dir);

    for (std::size_t t = 0; t < n_ti; ++t) {
      if (t > 0) z = rho * z + innov * gauss(rng);
      Minutes when = t0 + Minutes(t) * kIntervalMinutes;
      Date day = date_of(when);
      double base = source_profile(cfg, dir.kind, cfg.is_weekend_like(day), interval_of_day(when));
      double noisy = std::max(0.0, base + cfg.demand_sigma() * (base / peak) * z);

      // Propagate both signals down the direction.
      double clean_v = quantize_flow(base), noisy_v = quantize_flow(noisy);
      for (std::size_t i = 0; i < dir.mainline.size(); ++i) {
        out.clean.series[topo.index_of(dir.mainline[i])].values[t] = clean_v;
        out.truth.series[topo.index_of(dir.mainline[i])].values[t] = noisy_v;
        if (i + 1 == dir.mainline.size()) break;
        const auto& a = dir.links[i];
        if (a.kind == AttachmentKind::None) continue;
        double rc = quantize_flow(clean_v * fractions[i]);
        double rn = quantize_flow(noisy_v * fractions[i]);
        out.clean.series[topo.index_of(a.ramp)].values[t] = rc;
        out.truth.series[topo.index_of(a.ramp)].values[t] = rn;
        if (a.kind == AttachmentKind::Exit) {
          clean_v -= rc;
          noisy_v -= rn;
        } else {
          clean_v += rc;
          noisy_v += rn;
        }
      }
    }
  }

  // Sensor jitter, one stream per station.
  const double sensor = cfg.sensor_sigma();
  if (sensor > 0) {
    double peak = 0;
    for (const auto& dir : topo.directions())
      for (int i = 0; i < kIntervalsPerDay; ++i)
        peak = std::max({peak, source_profile(cfg, dir.kind, false, i), source_profile(cfg, dir.kind, true, i)});
    if (peak <= 0) peak = 1;
    for (std::size_t k = 0; k < out.truth.series.size(); ++k) {
      Rng rng(sub_seed(cfg.seed, "sensor", k));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (auto& v : out.truth.series[k].values)
        v = std::max(0.0, quantize_flow(v + sensor * std::sqrt(v / peak) * gauss(rng)));
    }
  }

  out.observed = out.truth;
  if (cfg.missing_rate > 0) {
    for (std::size_t k = 0; k < out.observed.series.size(); ++k)
      out.observed.series[k] =
          inject_missing(out.truth.series[k], cfg.missing_rate, cfg.mean_run_length,
                         sub_seed(cfg.seed, "missing", k))
              .corrupted;
  }
  return out;
}

/// Topology with `mainline` stations per direction (A and B) and ramps alternating
/// exit, none, entry, none ... along each direction.
inline Topology make_corridor(int mainline, int ramp_every = 2) {
  if (mainline < 1) throw ConfigError("need at least one mainline station per direction");
  std::vector<Direction> dirs;
  for (auto kind : {StationKind::MainlineA, StationKind::MainlineB}) {
    Direction d;
    d.kind = kind;
    int ramp_no = 0;
    for (int i = 1; i <= mainline; ++i) {
      d.mainline.push_back({i, kind});
      if (i == mainline) break;
      if (ramp_every > 0 && i % ramp_every == 0) {
        // ramp indices are unique across the corridor: A ramps odd, B ramps even
        int idx = 2 * i + (kind == StationKind::MainlineB ? 1 : 0);
        d.links.push_back(ramp_no++ % 2 == 0 ? Attachment::exit({idx, StationKind::Exit})
                                             : Attachment::entry({idx, StationKind::Entry}));
      } else {
        d.links.push_back(Attachment::none());
      }
    }
    dirs.push_back(std::move(d));
  }
  return Topology(std::move(dirs));
}

}  // namespace mflow
