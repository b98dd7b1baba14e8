#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/series.hpp"
#include "mflow/time.hpp"
#include "mflow/topology.hpp"

namespace mflow {

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n-1)p). `sorted` must be ascending and non-empty.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ProfileCell {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double p20 = std::numeric_limits<double>::quiet_NaN();
  double p80 = std::numeric_limits<double>::quiet_NaN();
  int count = 0;

  bool empty() const { return count == 0; }
};

/// Per station: for each day of week (Mon=0) and each of the 480 TIs, the mean flow
/// with its 20th/80th percentile band. Cells without samples are flagged empty and
/// carry NaN rather than zero.
struct DailyProfile {
  StationId station;
  std::vector<DateRange> period;
  std::vector<DateRange> excluded;
  std::vector<ProfileCell> cells = std::vector<ProfileCell>(7 * kIntervalsPerDay);

  const ProfileCell& cell(int day, int interval) const { return cells[day * kIntervalsPerDay + interval]; }
  ProfileCell& cell(int day, int interval) { return cells[day * kIntervalsPerDay + interval]; }

  std::size_t empty_cells() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto& c) { return c.empty(); }));
  }
};

namespace detail {
inline bool in_any(const std::vector<DateRange>& ranges, Date d) {
  for (const auto& r : ranges)
    if (r.contains(d)) return true;
  return false;
}
}  // namespace detail

/// Profile over the union of `period` ranges minus `excluded` ranges. Masked samples
/// are ignored. The period must span at least one full week.
inline DailyProfile build_profile(const FlowSeries& series, const std::vector<DateRange>& period,
                                  const std::vector<DateRange>& excluded = {}) {
  int days = 0;
  for (const auto& r : period) days += r.days();
  if (period.empty() || days < 7) throw ConfigError("profile period must cover at least one full week");

  std::vector<std::vector<double>> samples(7 * kIntervalsPerDay);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.missing[i]) continue;
    Minutes t = series.time_at(i);
    Date d = date_of(t);
    if (!detail::in_any(period, d) || detail::in_any(excluded, d)) continue;
    samples[day_of_week(d) * kIntervalsPerDay + interval_of_day(t)].push_back(series.values[i]);
  }

  DailyProfile prof;
  prof.station = series.station;
  prof.period = period;
  prof.excluded = excluded;
  for (std::size_t c = 0; c < samples.size(); ++c) {
    auto& v = samples[c];
    if (v.empty()) continue;
    double sum = 0;
    for (double x : v) sum += x;
    std::sort(v.begin(), v.end());
    auto& cell = prof.cells[c];
    cell.count = static_cast<int>(v.size());
    cell.mean = sum / static_cast<double>(v.size());
    cell.p20 = quantile_sorted(v, 0.20);
    cell.p80 = quantile_sorted(v, 0.80);
  }
  return prof;
}

inline DailyProfile build_profile(const FlowSeries& series, const DateRange& period,
                                  const std::vector<DateRange>& excluded = {}) {
  return build_profile(series, std::vector<DateRange>{period}, excluded);
}

inline std::vector<DailyProfile> build_profiles(const SeriesSet& data, const std::vector<DateRange>& period,
                                                const std::vector<DateRange>& excluded = {}) {
  std::vector<DailyProfile> out;
  out.reserve(data.stations());
  for (const auto& s : data.series) out.push_back(build_profile(s, period, excluded));
  return out;
}

// ---------------------------------------------------------------------------
// Missing data

struct MissingRun {
  StationId station;
  std::size_t start = 0;  // TI index into the series
  std::size_t length = 1;
  std::string reason;

  std::size_t end() const { return start + length; }
  friend bool operator==(const MissingRun&, const MissingRun&) = default;
};

struct DetectOptions {
  /// Mean neighbour flow over a zero run needed to call it a fault, veh/TI.
  double neighbour_threshold = 10.0;
};

/// Flags maximal runs of zero counts at a station while its topological neighbours
/// carry on average at least `neighbour_threshold` vehicles per TI over the run.
/// Neighbour cells that are themselves masked are left out of the average.
inline std::vector<MissingRun> detect_missing(const SeriesSet& data, const Topology& topo,
                                              const DetectOptions& opt = {}) {
  data.check_aligned();
  std::vector<MissingRun> runs;
  for (const auto& s : data.series) {
    std::vector<const FlowSeries*> nbrs;
    for (const auto& id : topo.neighbours(s.station)) nbrs.push_back(&data.at(id));
    std::size_t t = 0;
    while (t < s.size()) {
      if (s.values[t] != 0.0) {
        ++t;
        continue;
      }
      std::size_t b = t;
      while (t < s.size() && s.values[t] == 0.0) ++t;
      double sum = 0;
      std::size_t n = 0;
      for (auto* nb : nbrs)
        for (std::size_t k = b; k < t; ++k)
          if (!nb->missing[k]) {
            sum += nb->values[k];
            ++n;
          }
      if (n > 0 && sum / static_cast<double>(n) >= opt.neighbour_threshold)
        runs.push_back({s.station, b, t - b, "zero-count-with-flowing-neighbours"});
    }
  }
  return runs;
}

/// Runs recorded in the series' own missing mask (e.g. from a data file's missing column).
inline std::vector<MissingRun> runs_from_mask(const FlowSeries& s, const std::string& reason = "masked") {
  std::vector<MissingRun> runs;
  std::size_t t = 0;
  while (t < s.size()) {
    if (!s.missing[t]) {
      ++t;
      continue;
    }
    std::size_t b = t;
    while (t < s.size() && s.missing[t]) ++t;
    runs.push_back({s.station, b, t - b, reason});
  }
  return runs;
}

/// Union of run lists, merged into non-overlapping runs per station.
inline std::vector<MissingRun> merge_runs(const std::vector<MissingRun>& runs) {
  std::map<StationId, std::vector<std::pair<std::size_t, std::size_t>>> spans;
  std::map<StationId, std::string> reasons;
  for (const auto& r : runs) {
    spans[r.station].push_back({r.start, r.end()});
    reasons.emplace(r.station, r.reason);
  }
  std::vector<MissingRun> out;
  for (auto& [id, v] : spans) {
    std::sort(v.begin(), v.end());
    std::size_t b = v[0].first, e = v[0].second;
    for (std::size_t i = 1; i <= v.size(); ++i) {
      if (i < v.size() && v[i].first <= e) {
        e = std::max(e, v[i].second);
        continue;
      }
      out.push_back({id, b, e - b, reasons[id]});
      if (i < v.size()) {
        b = v[i].first;
        e = v[i].second;
      }
    }
  }
  return out;
}

struct MonthlyCount {
  int year = 0;
  unsigned month = 0;
  std::size_t missing_intervals = 0;
};

/// Flagged TIs aggregated per calendar month over all stations.
inline std::vector<MonthlyCount> monthly_missing_counts(const SeriesSet& data,
                                                        const std::vector<MissingRun>& runs) {
  std::map<std::pair<int, unsigned>, std::size_t> counts;
  // every month of the data appears, even with zero faults
  for (std::size_t t = 0; t < data.length(); t += kIntervalsPerDay) {
    Date d = date_of(data.time_at(t));
    counts[{year_of(d), month_of(d)}] += 0;
  }
  for (const auto& r : runs)
    for (std::size_t k = r.start; k < r.end(); ++k) {
      Date d = date_of(data.time_at(k));
      ++counts[{year_of(d), month_of(d)}];
    }
  std::vector<MonthlyCount> out;
  for (const auto& [k, n] : counts) out.push_back({k.first, k.second, n});
  return out;
}

enum class ImputeStrategy {
  MonthlyDayOfWeek,  // mean of the same TI on the same weekday in the same month
  AdjacentDay,       // same TI of the previous day, else the next day
  NeighbourInterval  // mean of the nearest valid TI before and after
};

struct ImputeOptions {
  ImputeStrategy strategy = ImputeStrategy::MonthlyDayOfWeek;
  /// When set, reference days come from these ranges instead of the missing value's month.
  std::optional<std::vector<DateRange>> reference;
};

struct ImputeResult {
  FlowSeries series;
  std::vector<std::size_t> unimputable;  // TI indices left masked
};

/// Masks every TI covered by `runs` (for this series' station) and refills masked
/// values. Reference values are always read from the masked state, never from values
/// filled in the same call, so the result does not depend on fill order.
inline ImputeResult impute(const FlowSeries& input, const std::vector<MissingRun>& runs,
                           const ImputeOptions& opt = {}) {
  FlowSeries masked = input;
  for (const auto& r : runs) {
    if (r.station != input.station) continue;
    if (r.end() > masked.size()) throw DataError("missing run beyond end of series " + input.station.render());
    for (std::size_t k = r.start; k < r.end(); ++k) masked.set_missing(k);
  }

  ImputeResult res{masked, {}};
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(masked.size());
  const std::ptrdiff_t week = 7 * kIntervalsPerDay;

  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!masked.missing[i]) continue;
    std::optional<double> value;
    switch (opt.strategy) {
      case ImputeStrategy::MonthlyDayOfWeek: {
        Date d = date_of(masked.time_at(i));
        auto same_pool = [&](std::ptrdiff_t j) {
          Date dj = date_of(masked.time_at(j));
          if (opt.reference) return detail::in_any(*opt.reference, dj);
          return year_of(dj) == year_of(d) && month_of(dj) == month_of(d);
        };
        double sum = 0;
        int cnt = 0;
        for (int dir : {-1, 1}) {
          for (std::ptrdiff_t j = i + dir * week; j >= 0 && j < n; j += dir * week) {
            if (!same_pool(j)) {
              if (!opt.reference) break;  // months are contiguous
              continue;
            }
            if (!masked.missing[j]) {
              sum += masked.values[j];
              ++cnt;
            }
          }
        }
        if (cnt > 0) value = sum / cnt;
        break;
      }
      case ImputeStrategy::AdjacentDay: {
        for (std::ptrdiff_t j : {i - kIntervalsPerDay, i + kIntervalsPerDay})
          if (j >= 0 && j < n && !masked.missing[j]) {
            value = masked.values[j];
            break;
          }
        break;
      }
      case ImputeStrategy::NeighbourInterval: {
        std::ptrdiff_t a = i - 1, b = i + 1;
        while (a >= 0 && masked.missing[a]) --a;
        while (b < n && masked.missing[b]) ++b;
        if (a >= 0 && b < n)
          value = 0.5 * (masked.values[a] + masked.values[b]);
        else if (a >= 0)
          value = masked.values[a];
        else if (b < n)
          value = masked.values[b];
        break;
      }
    }
    if (value) {
      res.series.values[i] = *value;
      res.series.missing[i] = false;
    } else {
      res.unimputable.push_back(static_cast<std::size_t>(i));
    }
  }
  return res;
}

inline std::string to_string(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::MonthlyDayOfWeek: return "monthly-dow";
    case ImputeStrategy::AdjacentDay: return "adjacent-day";
    case ImputeStrategy::NeighbourInterval: return "neighbour-ti";
  }
  return "?";
}

inline ImputeStrategy parse_impute_strategy(const std::string& s) {
  if (s == "monthly-dow") return ImputeStrategy::MonthlyDayOfWeek;
  if (s == "adjacent-day") return ImputeStrategy::AdjacentDay;
  if (s == "neighbour-ti") return ImputeStrategy::NeighbourInterval;
  throw ConfigError("unknown imputation strategy '" + s + "'");
}

}  // namespace mflow
