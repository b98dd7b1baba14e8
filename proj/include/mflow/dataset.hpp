#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/error.hpp"
#include "mflow/random.hpp"
#include "mflow/series.hpp"
#include "mflow/time.hpp"

namespace mflow {

/// One training pair: the N x R history matrix ending at TI `anchor` and the
/// N-vector observed at TI anchor + P. Row j is station j, column c is TI
/// anchor - R + 1 + c.
struct WindowSample {
  std::size_t stations = 0;
  std::size_t past = 0;          // R
  std::size_t horizon = 0;       // P
  std::size_t anchor = 0;        // TI index of the last input column in the source set
  Minutes anchor_time = 0;
  std::vector<double> input;     // stations * past, row-major
  std::vector<double> target;    // stations

  double at(std::size_t station, std::size_t col) const { return input[station * past + col]; }
  double& at(std::size_t station, std::size_t col) { return input[station * past + col]; }
  Minutes target_time() const { return anchor_time + Minutes(horizon) * kIntervalMinutes; }

  /// Column c of the matrix: the flows of all stations at one TI.
  std::vector<double> column(std::size_t c) const {
    std::vector<double> v(stations);
    for (std::size_t j = 0; j < stations; ++j) v[j] = at(j, c);
    return v;
  }
};

struct Windows {
  std::vector<WindowSample> samples;
  std::size_t dropped_masked = 0;
  std::vector<std::string> warnings;
};

/// TI index range [begin, end) of `range` inside the set; the range must be covered.
inline std::pair<std::size_t, std::size_t> interval_span(const SeriesSet& data, const DateRange& range) {
  Minutes b = range.begin_minutes(), e = range.end_minutes();
  if (b < data.start() || e > data.time_at(data.length()))
    throw DataError("range " + format_date(range.first) + ":" + format_date(range.last) +
                    " is not covered by the data (" + format_timestamp(data.start()) + " .. " +
                    format_timestamp(data.time_at(data.length())) + ")");
  return {static_cast<std::size_t>((b - data.start()) / kIntervalMinutes),
          static_cast<std::size_t>((e - data.start()) / kIntervalMinutes)};
}

/// Sliding windows over one contiguous range: n - R - P + 1 samples for n TIs,
/// ordered by anchor. Windows touching a masked value are dropped and counted.
inline Windows make_windows(const SeriesSet& data, std::size_t R, std::size_t P, const DateRange& range) {
  if (R < 1 || P < 1) throw ConfigError("R and P must be >= 1");
  data.check_aligned();
  auto [begin, end] = interval_span(data, range);
  const std::size_t n = end - begin, N = data.stations();
  Windows out;
  if (n < R + P) {
    out.warnings.push_back("range " + format_date(range.first) + ":" + format_date(range.last) + " has " +
                           std::to_string(n) + " TIs, fewer than R+P=" + std::to_string(R + P) +
                           "; no windows");
    return out;
  }

  // bad[t]: some station is masked at TI t
  std::vector<char> bad(n, 0);
  for (const auto& s : data.series)
    for (std::size_t t = 0; t < n; ++t) bad[t] |= s.missing[begin + t] ? 1 : 0;
  std::vector<std::size_t> bad_prefix(n + 1, 0);
  for (std::size_t t = 0; t < n; ++t) bad_prefix[t + 1] = bad_prefix[t] + bad[t];

  out.samples.reserve(n - R - P + 1);
  for (std::size_t first = 0; first + R + P <= n; ++first) {
    std::size_t last = first + R - 1, tgt = last + P;
    if (bad_prefix[last + 1] - bad_prefix[first] > 0 || bad[tgt]) {
      ++out.dropped_masked;
      continue;
    }
    WindowSample w;
    w.stations = N;
    w.past = R;
    w.horizon = P;
    w.anchor = begin + last;
    w.anchor_time = data.time_at(begin + last);
    w.input.resize(N * R);
    w.target.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
      const auto& v = data.series[j].values;
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(begin + first), R, w.input.begin() + static_cast<std::ptrdiff_t>(j * R));
      w.target[j] = v[begin + tgt];
    }
    out.samples.push_back(std::move(w));
  }
  if (out.dropped_masked > 0)
    out.warnings.push_back(std::to_string(out.dropped_masked) + " windows dropped for masked values");
  return out;
}

/// The window whose target is TI `target` of the set, if it fits inside the data and
/// touches no masked value. R may be 0 (target only).
inline std::optional<WindowSample> window_for_target(const SeriesSet& data, std::size_t target, std::size_t R,
                                                     std::size_t P) {
  if (target >= data.length() || target < P + (R ? R - 1 : 0)) return std::nullopt;
  const std::size_t anchor = target - P, N = data.stations();
  WindowSample w;
  w.stations = N;
  w.past = R;
  w.horizon = P;
  w.anchor = anchor;
  w.anchor_time = data.time_at(anchor);
  w.input.resize(N * R);
  w.target.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const auto& s = data.series[j];
    if (s.missing[target]) return std::nullopt;
    w.target[j] = s.values[target];
    for (std::size_t c = 0; c < R; ++c) {
      std::size_t i = anchor + 1 + c - R;
      if (s.missing[i]) return std::nullopt;
      w.at(j, c) = s.values[i];
    }
  }
  return w;
}

/// Train ranges (one or more, never crossed by a window), validation and test ranges.
struct SplitSpec {
  std::vector<DateRange> train;
  DateRange validation{};
  DateRange test{};

  void validate() const {
    if (train.empty()) throw ConfigError("split needs at least one training range");
    std::vector<DateRange> all = train;
    all.push_back(validation);
    all.push_back(test);
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (all[i].overlaps(all[j])) throw ConfigError("split ranges must be pairwise disjoint");
  }

  static SplitSpec from_json(const nlohmann::json& j) {
    SplitSpec s;
    try {
      const auto& tr = j.at("train");
      if (tr.is_string())
        s.train.push_back(parse_date_range(tr.get<std::string>()));
      else
        for (const auto& r : tr) s.train.push_back(parse_date_range(r.get<std::string>()));
      s.validation = parse_date_range(j.at("validation").get<std::string>());
      s.test = parse_date_range(j.at("test").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("split: ") + e.what());
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    auto fmt = [](const DateRange& r) { return format_date(r.first) + ":" + format_date(r.last); };
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& r : train) tr.push_back(fmt(r));
    return {{"train", tr}, {"validation", fmt(validation)}, {"test", fmt(test)}};
  }

  /// Consecutive weeks starting at `start`: `train_weeks`, then one validation week, then one test week.
  static SplitSpec consecutive_weeks(Date start, int train_weeks, int val_weeks = 1, int test_weeks = 1) {
    using std::chrono::days;
    SplitSpec s;
    Date t_end = start + days(7 * train_weeks - 1);
    s.train.push_back({start, t_end});
    s.validation = {t_end + days(1), t_end + days(7 * val_weeks)};
    s.test = {s.validation.last + days(1), s.validation.last + days(7 * test_weeks)};
    s.validate();
    return s;
  }
};

struct SplitWindows {
  Windows train, validation, test;
};

inline SplitWindows make_split_windows(const SeriesSet& data, std::size_t R, std::size_t P, const SplitSpec& split) {
  split.validate();
  SplitWindows out;
  for (const auto& r : split.train) {
    auto w = make_windows(data, R, P, r);
    out.train.dropped_masked += w.dropped_masked;
    for (auto& s : w.samples) out.train.samples.push_back(std::move(s));
    for (auto& m : w.warnings) out.train.warnings.push_back(std::move(m));
  }
  out.validation = make_windows(data, R, P, split.validation);
  out.test = make_windows(data, R, P, split.test);
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

/// Per-station affine scaling fitted on training targets.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t stations() const { return mean.size(); }
  double forward(std::size_t j, double v) const { return (v - mean[j]) / scale[j]; }
  double inverse(std::size_t j, double v) const { return v * scale[j] + mean[j]; }

  nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
  static NormStats from_json(const nlohmann::json& j) {
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    if (s.mean.size() != s.scale.size()) throw SchemaError("normalisation stats size mismatch");
    return s;
  }
};

/// Each station's mean and population standard deviation over the training targets
/// (every TI of a range appears once as a target, so there is no window double
/// counting). Zero variance gives scale 1.
inline NormStats fit_stats(const std::vector<WindowSample>& train) {
  if (train.empty()) throw DataError("cannot fit normalisation on an empty training set");
  const std::size_t N = train.front().stations;
  NormStats st;
  st.mean.assign(N, 0.0);
  st.scale.assign(N, 1.0);
  for (const auto& s : train)
    for (std::size_t j = 0; j < N; ++j) st.mean[j] += s.target[j];
  for (auto& m : st.mean) m /= static_cast<double>(train.size());
  std::vector<double> var(N, 0.0);
  for (const auto& s : train)
    for (std::size_t j = 0; j < N; ++j) {
      double d = s.target[j] - st.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < N; ++j) {
    double sd = std::sqrt(var[j] / static_cast<double>(train.size()));
    st.scale[j] = sd > 0 ? sd : 1.0;
  }
  return st;
}

inline WindowSample normalize(const WindowSample& s, const NormStats& st) {
  if (st.stations() != s.stations) throw ShapeError("normalisation stats do not match station count");
  WindowSample out = s;
  for (std::size_t j = 0; j < s.stations; ++j) {
    for (std::size_t c = 0; c < s.past; ++c) out.at(j, c) = st.forward(j, s.at(j, c));
    out.target[j] = st.forward(j, s.target[j]);
  }
  return out;
}

inline std::vector<WindowSample> normalize(const std::vector<WindowSample>& v, const NormStats& st) {
  std::vector<WindowSample> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(normalize(s, st));
  return out;
}

inline WindowSample denormalize(const WindowSample& s, const NormStats& st) {
  WindowSample out = s;
  for (std::size_t j = 0; j < s.stations; ++j) {
    for (std::size_t c = 0; c < s.past; ++c) out.at(j, c) = st.inverse(j, s.at(j, c));
    out.target[j] = st.inverse(j, s.target[j]);
  }
  return out;
}

/// Seeded permutation of sample indices for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(sub_seed(seed, "epoch", epoch));
  // Fisher-Yates with our own index draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace mflow
