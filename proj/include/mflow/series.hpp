#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/station.hpp"
#include "mflow/time.hpp"

namespace mflow {

/// Vehicle counts of one station at consecutive 3-minute intervals.
/// Missing values are stored as 0 with the mask bit set.
struct FlowSeries {
  StationId station;
  Minutes start = 0;
  std::vector<double> values;
  std::vector<bool> missing;

  FlowSeries() = default;
  FlowSeries(StationId id, Minutes start_time, std::vector<double> v)
      : station(id), start(start_time), values(std::move(v)), missing(values.size(), false) {}

  std::size_t size() const { return values.size(); }
  Minutes time_at(std::size_t i) const { return start + Minutes(i) * kIntervalMinutes; }
  Minutes end() const { return time_at(size()); }

  /// Index of the TI starting at `t`; `t` must lie on this series' grid.
  std::ptrdiff_t index_of(Minutes t) const {
    return static_cast<std::ptrdiff_t>((t - start) / kIntervalMinutes);
  }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
  }

  void set_missing(std::size_t i) {
    values[i] = 0.0;
    missing[i] = true;
  }

  friend bool operator==(const FlowSeries&, const FlowSeries&) = default;
};

inline void require_aligned(const FlowSeries& a, const FlowSeries& b) {
  if (a.start != b.start || a.size() != b.size())
    throw AlignmentError("series " + a.station.render() + " and " + b.station.render() +
                         " are not aligned (start " + format_timestamp(a.start) + " len " +
                         std::to_string(a.size()) + " vs start " + format_timestamp(b.start) +
                         " len " + std::to_string(b.size()) + ")");
}

/// A set of aligned series, one per station, in a fixed station order.
struct SeriesSet {
  std::vector<FlowSeries> series;

  std::size_t stations() const { return series.size(); }
  std::size_t length() const { return series.empty() ? 0 : series.front().size(); }
  Minutes start() const { return series.empty() ? 0 : series.front().start; }
  Minutes time_at(std::size_t i) const { return start() + Minutes(i) * kIntervalMinutes; }

  const FlowSeries& at(const StationId& id) const {
    for (const auto& s : series)
      if (s.station == id) return s;
    throw DataError("no series for station " + id.render());
  }
  FlowSeries& at(const StationId& id) {
    return const_cast<FlowSeries&>(std::as_const(*this).at(id));
  }

  void check_aligned() const {
    for (std::size_t i = 1; i < series.size(); ++i) require_aligned(series.front(), series[i]);
    if (!series.empty() && !on_interval_grid(start()))
      throw AlignmentError("series start " + format_timestamp(start()) + " is off the 3-minute grid");
  }

  friend bool operator==(const SeriesSet&, const SeriesSet&) = default;
};

}  // namespace mflow
