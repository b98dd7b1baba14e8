#include <gtest/gtest.h>

#include <random>

#include "mflow/dataset.hpp"
#include "mflow/synthgen.hpp"
#include "support.hpp"

using namespace mflow;

namespace {
const Date kDay = make_date(2017, 4, 3);

// One station whose values are 1, 2, 3, ... so every cell names its own TI.
SeriesSet counting_set(std::size_t n, std::size_t stations = 1) {
  SeriesSet set;
  for (std::size_t j = 0; j < stations; ++j) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = double(i + 1) + 1000.0 * double(j);
    set.series.push_back(FlowSeries(StationId{int(j) + 1, StationKind::MainlineA}, to_minutes(kDay), v));
  }
  return set;
}

DateRange one_day() { return {kDay, kDay}; }

// The same windowing rule applied to the first n TIs only.
Windows windows_n(std::size_t n, std::size_t R, std::size_t P) {
  auto set = counting_set(480);
  for (auto& s : set.series)
    for (std::size_t i = n; i < 480; ++i) s.set_missing(i);
  auto w = make_windows(set, R, P, one_day());
  // masked tail windows are dropped, so what is left is the n-TI answer
  return w;
}
}  // namespace

TEST(Windows, FiveTisRTwoPOne) {
  auto w = windows_n(5, 2, 1);
  ASSERT_EQ(w.samples.size(), 3u);
  const double expect[3][3] = {{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(w.samples[k].at(0, 0), expect[k][0]);
    EXPECT_EQ(w.samples[k].at(0, 1), expect[k][1]);
    EXPECT_EQ(w.samples[k].target[0], expect[k][2]);
  }
}

TEST(Windows, FiveTisRThreePTwo) {
  auto w = windows_n(5, 3, 2);
  ASSERT_EQ(w.samples.size(), 1u);
  EXPECT_EQ(w.samples[0].input, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(w.samples[0].target[0], 5);
}

TEST(Windows, TooShortGivesWarningAndNothing) {
  // a 480-TI day with R + P - 1 = 480
  auto w = make_windows(counting_set(480), 471, 10, one_day());
  EXPECT_TRUE(w.samples.empty());
  ASSERT_FALSE(w.warnings.empty());
  EXPECT_EQ(make_windows(counting_set(480), 470, 10, one_day()).samples.size(), 1u);
  EXPECT_EQ(make_windows(counting_set(480), 470, 9, one_day()).samples.size(), 2u);
}

TEST(Windows, BadParameters) {
  EXPECT_THROW(make_windows(counting_set(480), 0, 1, one_day()), ConfigError);
  EXPECT_THROW(make_windows(counting_set(480), 1, 0, one_day()), ConfigError);
  EXPECT_THROW(make_windows(counting_set(480), 1, 1, DateRange{kDay, kDay + std::chrono::days(1)}), DataError);
}

TEST(Windows, CountLawOverRandomTriples) {
  std::mt19937_64 rng(1);
  auto set = counting_set(7 * 480, 2);
  DateRange week{kDay, kDay + std::chrono::days(6)};
  std::uniform_int_distribution<std::size_t> rdist(1, 30), pdist(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t R = rdist(rng), P = pdist(rng);
    auto w = make_windows(set, R, P, week);
    const std::size_t n = 7 * 480;
    ASSERT_EQ(w.samples.size(), n - R - P + 1) << R << " " << P;
    for (std::size_t k = 1; k < w.samples.size(); ++k) ASSERT_LT(w.samples[k - 1].anchor, w.samples[k].anchor);
  }
}

TEST(Windows, SpotCheckCellsAgainstSource) {
  GeneratorConfig g;
  g.topology = make_corridor(3);
  g.weeks = 1;
  auto d = generate(g);
  std::mt19937_64 rng(2);
  DateRange r{g.start + std::chrono::days(1), g.start + std::chrono::days(3)};
  auto w = make_windows(d.observed, 6, 4, r);
  std::uniform_int_distribution<std::size_t> pick(0, w.samples.size() - 1);
  for (int k = 0; k < 500; ++k) {
    const auto& s = w.samples[pick(rng)];
    std::size_t j = rng() % s.stations, c = rng() % s.past;
    ASSERT_EQ(s.at(j, c), d.observed.series[j].values[s.anchor - s.past + 1 + c]);
    ASSERT_EQ(s.target[j], d.observed.series[j].values[s.anchor + s.horizon]);
    ASSERT_EQ(s.anchor_time, d.observed.time_at(s.anchor));
    ASSERT_EQ(s.column(c)[j], s.at(j, c));
  }
}

TEST(Windows, MaskedValuesDropWindows) {
  auto set = counting_set(480);
  set.series[0].set_missing(100);
  auto w = make_windows(set, 3, 2, one_day());
  // windows whose input covers TI 100 (3 of them) or whose target is TI 100 (1)
  EXPECT_EQ(w.dropped_masked, 4u);
  EXPECT_EQ(w.samples.size(), 480u - 3 - 2 + 1 - 4);
  for (const auto& s : w.samples) {
    for (double v : s.input) EXPECT_NE(v, 0.0);
    EXPECT_NE(s.target[0], 0.0);
  }
}

TEST(Windows, WindowForTarget) {
  auto set = counting_set(480);
  auto w = window_for_target(set, 10, 3, 2);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(w->input, (std::vector<double>{7, 8, 9}));  // TIs 6..8
  EXPECT_EQ(w->target[0], 11);
  EXPECT_FALSE(window_for_target(set, 3, 3, 2).has_value());
  EXPECT_TRUE(window_for_target(set, 4, 3, 2).has_value());
  EXPECT_TRUE(window_for_target(set, 1, 0, 1).has_value());
  set.series[0].set_missing(7);
  EXPECT_FALSE(window_for_target(set, 10, 3, 2).has_value());
}

TEST(Split, RangesAreDisjointAndWindowsStayInside) {
  GeneratorConfig g;
  g.topology = make_corridor(2);
  g.weeks = 4;
  auto d = generate(g);
  auto sp = SplitSpec::consecutive_weeks(g.start, 2);
  auto w = make_split_windows(d.observed, 6, 5, sp);
  auto inside = [&](const WindowSample& s, const DateRange& r) {
    Minutes first = d.observed.time_at(s.anchor - s.past + 1), tgt = d.observed.time_at(s.anchor + s.horizon);
    return first >= r.begin_minutes() && tgt < r.end_minutes();
  };
  for (const auto& s : w.train.samples) EXPECT_TRUE(inside(s, sp.train[0]));
  for (const auto& s : w.validation.samples) EXPECT_TRUE(inside(s, sp.validation));
  for (const auto& s : w.test.samples) EXPECT_TRUE(inside(s, sp.test));
  EXPECT_EQ(w.train.samples.size(), 14u * 480 - 6 - 5 + 1);

  SplitSpec bad = sp;
  bad.test = sp.validation;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Split, TwoTrainingRangesNeverCrossTheGap) {
  auto set = counting_set(3 * 480);
  SplitSpec sp;
  sp.train = {{kDay, kDay}, {kDay + std::chrono::days(1), kDay + std::chrono::days(1)}};
  sp.validation = {kDay + std::chrono::days(2), kDay + std::chrono::days(2)};
  sp.test = {kDay + std::chrono::days(3), kDay + std::chrono::days(3)};
  EXPECT_THROW(make_split_windows(set, 2, 1, sp), DataError);  // test day is not covered
  sp.test = sp.validation;
  EXPECT_THROW(make_split_windows(set, 2, 1, sp), ConfigError);
  auto set4 = counting_set(4 * 480);
  sp.test = {kDay + std::chrono::days(3), kDay + std::chrono::days(3)};
  auto w = make_split_windows(set4, 2, 1, sp);
  EXPECT_EQ(w.train.samples.size(), 2u * (480 - 2));
}

TEST(Split, JsonRoundTrip) {
  auto sp = SplitSpec::consecutive_weeks(kDay, 3);
  auto back = SplitSpec::from_json(sp.to_json());
  EXPECT_EQ(back.to_json(), sp.to_json());
  EXPECT_THROW(SplitSpec::from_json(nlohmann::json::parse(R"({"train": "2017-01-01:2017-01-07"})")), SchemaError);
}

TEST(Normalize, ConstantStationGoesToZero) {
  FlowSeries s(StationId{1, StationKind::MainlineA}, to_minutes(kDay), std::vector<double>(480, 42));
  SeriesSet set;
  set.series.push_back(s);
  auto w = make_windows(set, 3, 1, one_day());
  auto st = fit_stats(w.samples);
  EXPECT_EQ(st.scale[0], 1.0);
  for (const auto& n : normalize(w.samples, st)) {
    for (double v : n.input) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(n.target[0], 0.0);
  }
}

TEST(Normalize, RoundTripAndZeroMean) {
  GeneratorConfig g;
  g.topology = make_corridor(3);
  g.weeks = 1;
  auto d = generate(g);
  auto w = make_windows(d.observed, 4, 1, DateRange{g.start, g.start + std::chrono::days(6)});
  auto st = fit_stats(w.samples);
  auto n = normalize(w.samples, st);
  for (std::size_t j = 0; j < st.stations(); ++j) {
    double m = 0;
    for (const auto& s : n) m += s.target[j];
    EXPECT_LT(std::abs(m / double(n.size())), 1e-9);
  }
  for (std::size_t k = 0; k < n.size(); k += 97) {
    auto back = denormalize(n[k], st);
    for (std::size_t i = 0; i < back.input.size(); ++i)
      EXPECT_LE(std::abs(back.input[i] - w.samples[k].input[i]), 1e-9 * std::max(1.0, std::abs(w.samples[k].input[i])));
  }
  EXPECT_THROW(fit_stats({}), DataError);
  auto bad = st;
  bad.mean.pop_back();
  bad.scale.pop_back();
  EXPECT_THROW(normalize(w.samples[0], bad), ShapeError);
  EXPECT_EQ(NormStats::from_json(st.to_json()).mean, st.mean);
}

TEST(Shuffle, SeededPermutation) {
  auto a = epoch_order(100, 7, 3), b = epoch_order(100, 7, 3), c = epoch_order(100, 7, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  auto s = a;
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(s[i], i);
}
