#include <gtest/gtest.h>

#include "mflow/synthgen.hpp"
#include "mflow/topology.hpp"

using namespace mflow;

namespace {
GeneratorConfig corridor(int mainline, int weeks, std::uint64_t seed) {
  GeneratorConfig g;
  g.topology = make_corridor(mainline);
  g.weeks = weeks;
  g.seed = seed;
  return g;
}
}  // namespace

TEST(Synthgen, SameSeedSameOutput) {
  auto g = corridor(4, 1, 9);
  g.missing_rate = 0.01;
  auto a = generate(g), b = generate(g);
  EXPECT_EQ(a.observed, b.observed);
  EXPECT_EQ(a.truth, b.truth);
  g.seed = 10;
  EXPECT_NE(generate(g).observed, a.observed);
}

TEST(Synthgen, ShapeIs480PerDay) {
  auto d = generate(corridor(3, 2, 1));
  EXPECT_EQ(d.observed.length(), 2u * 7 * 480);
  EXPECT_EQ(d.observed.stations(), make_corridor(3).station_count());
  d.observed.check_aligned();
}

TEST(Synthgen, NoiselessPassesEveryValidatorAtZero) {
  auto g = corridor(10, 2, 3);
  g.noise_sigma = 0;
  auto d = generate(g);
  EXPECT_EQ(d.observed, d.clean);
  for (const auto& r : validate_topology(g.topology, d.observed, 0.0)) EXPECT_TRUE(r.passed()) << r.label;
  // the clean signal is conservative even with noise switched on
  g.noise_sigma = 4;
  for (const auto& r : validate_topology(g.topology, generate(g).clean, 0.0)) EXPECT_TRUE(r.passed()) << r.label;
}

TEST(Synthgen, MorningPeakAboveNightOnWeekdays) {
  auto g = corridor(5, 2, 4);
  auto d = generate(g);
  for (const auto& id : g.topology.mainline_stations()) {
    const auto& s = d.observed.at(id);
    for (std::size_t day = 0; day < 14; ++day) {
      if (g.is_weekend_like(g.start + std::chrono::days(day))) continue;
      double peak = s.values[day * 480 + 170];  // 08:30
      double night = s.values[day * 480 + 60];  // 03:00
      EXPECT_GT(peak, night) << id.render() << " day " << day;
    }
  }
}

TEST(Synthgen, WeekdayTotalsExceedWeekendTotals) {
  auto g = corridor(5, 2, 5);
  auto d = generate(g);
  for (const auto& id : g.topology.mainline_stations()) {
    const auto& s = d.observed.at(id);
    double wd = 0, we = 0;
    int nwd = 0, nwe = 0;
    for (std::size_t day = 0; day < 14; ++day) {
      double tot = 0;
      for (int i = 0; i < 480; ++i) tot += s.values[day * 480 + i];
      if (day_of_week(g.start + std::chrono::days(day)) >= 5)
        we += tot, ++nwe;
      else
        wd += tot, ++nwd;
    }
    EXPECT_GT(wd / nwd, we / nwe) << id.render();
  }
}

TEST(Synthgen, HolidaysUseTheWeekendShape) {
  auto g = corridor(2, 1, 6);
  g.noise_sigma = 0;
  g.holidays = {g.start + std::chrono::days(2)};  // a Wednesday
  auto d = generate(g);
  const auto& s = d.clean.series[0];
  for (int i = 0; i < 480; ++i) EXPECT_EQ(s.values[2 * 480 + i], s.values[5 * 480 + i]);
}

TEST(Synthgen, ValuesOnQuantumGridAndNonNegative) {
  auto d = generate(corridor(4, 1, 7));
  for (const auto& s : d.observed.series)
    for (double v : s.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_EQ(v, quantize_flow(v));
    }
}

TEST(InjectMissing, RateZeroIsIdentity) {
  FlowSeries s(StationId{1, StationKind::MainlineA}, 0, std::vector<double>(100, 5.0));
  auto c = inject_missing(s, 0.0, 5, 1);
  EXPECT_EQ(c.corrupted, s);
  EXPECT_EQ(c.corrupted.missing_count(), 0u);
}

TEST(InjectMissing, RateOneZeroesEverything) {
  FlowSeries s(StationId{1, StationKind::MainlineA}, 0, std::vector<double>(100, 5.0));
  auto c = inject_missing(s, 1.0, 1, 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(c.corrupted.values[i], 0.0);
    EXPECT_TRUE(c.corrupted.missing[i]);
  }
  EXPECT_EQ(c.original, s);
}

TEST(InjectMissing, OnePercentOverFourWeeksStaysInBand) {
  const std::size_t n = 4 * 7 * 480;
  FlowSeries s(StationId{1, StationKind::MainlineA}, 0, std::vector<double>(n, 5.0));
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto c = inject_missing(s, 0.01, 5, seed);
    double frac = double(c.corrupted.missing_count()) / double(n);
    EXPECT_GE(frac, 0.005) << seed;
    EXPECT_LE(frac, 0.02) << seed;
  }
}

TEST(InjectMissing, RunLengthsAverageNearTheMean) {
  const std::size_t n = 200000;
  FlowSeries s(StationId{1, StationKind::MainlineA}, 0, std::vector<double>(n, 5.0));
  auto c = inject_missing(s, 0.05, 8, 3);
  std::size_t runs = 0, masked = 0;
  for (std::size_t i = 0; i < n; ++i) {
    masked += c.corrupted.missing[i];
    if (c.corrupted.missing[i] && (i == 0 || !c.corrupted.missing[i - 1])) ++runs;
  }
  // adjacent runs can merge, so the observed mean is a bit above 8
  double mean_len = double(masked) / double(runs);
  EXPECT_GT(mean_len, 7.5);
  EXPECT_LT(mean_len, 9.5);
  EXPECT_NEAR(double(masked) / n, 0.05, 0.01);
}

TEST(Synthgen, ConfigValidation) {
  auto g = corridor(2, 1, 1);
  g.weeks = 0;
  EXPECT_THROW(generate(g), ConfigError);
  g = corridor(2, 1, 1);
  g.noise_sigma = -1;
  EXPECT_THROW(generate(g), ConfigError);
  g = corridor(2, 1, 1);
  g.exit_fraction_max = 1.5;
  EXPECT_THROW(generate(g), ConfigError);
  g = GeneratorConfig{};
  EXPECT_THROW(generate(g), ConfigError);  // empty topology
}
