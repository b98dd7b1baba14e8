#include <gtest/gtest.h>

#include <random>

#include "mflow/models/forecaster.hpp"
#include "mflow/synthgen.hpp"
#include "support.hpp"

using namespace mflow;
using testing_support::FdResult;
using testing_support::random_vector;

namespace {
const Arch kNeural[] = {Arch::Bpnn, Arch::SepBpnn, Arch::Cnn, Arch::Lstm, Arch::CnnLstm};

ModelConfig small(Arch a, std::size_t N, std::size_t R, std::size_t P = 1) {
  ModelConfig c;
  c.arch = a;
  c.stations = N;
  c.R = R;
  c.P = P;
  c.bpnn_hidden = 6;
  c.sep_hidden = 4;
  c.cnn_channels1 = 2;
  c.cnn_channels2 = 3;
  c.lstm_hidden = 5;
  c.cnn_lstm_channels = 2;
  c.seed = 3;
  return c;
}

LossFn readout_loss(const std::vector<double>& c) {
  return [c](std::span<const double> y, std::span<double> dy) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      s += c[i] * y[i];
      dy[i] = c[i];
    }
    return s;
  };
}

WindowSample window(std::size_t N, std::size_t R, std::size_t P, std::vector<double> input, Minutes anchor_time) {
  WindowSample w;
  w.stations = N;
  w.past = R;
  w.horizon = P;
  w.anchor_time = anchor_time;
  w.input = std::move(input);
  w.target.assign(N, 0.0);
  return w;
}

NormStats unit_stats(std::size_t N) { return NormStats{std::vector<double>(N, 0.0), std::vector<double>(N, 1.0)}; }
}  // namespace

TEST(Models, ArchTagsRoundTrip) {
  for (auto a : {Arch::Bpnn, Arch::SepBpnn, Arch::Cnn, Arch::Lstm, Arch::CnnLstm, Arch::Dpp, Arch::Arima})
    EXPECT_EQ(parse_arch(to_string(a)), a);
  EXPECT_THROW(parse_arch("gru"), ConfigError);
}

TEST(Models, ConfigBounds) {
  auto c = small(Arch::Lstm, 3, 31);
  EXPECT_THROW(make_network(c), ConfigError);
  c.R = 30;
  c.P = 11;
  EXPECT_THROW(make_network(c), ConfigError);
  c.P = 10;
  EXPECT_NO_THROW(make_network(c));
  c.stations = 0;
  EXPECT_THROW(make_network(c), ConfigError);
  EXPECT_THROW(make_network(small(Arch::Dpp, 3, 2)), ConfigError);
}

TEST(Models, OutputShapeIsNForEveryArchAndR) {
  std::mt19937_64 rng(1);
  for (auto a : kNeural)
    for (std::size_t R : {1, 3, 6, 12}) {
      auto net = make_network(small(a, 4, R));
      auto y = net->predict(random_vector(4 * R, rng));
      EXPECT_EQ(y.size(), 4u) << to_string(a) << " R=" << R;
      EXPECT_THROW(net->predict(random_vector(4 * R + 1, rng)), ShapeError);
    }
}

TEST(Models, ZeroParametersGiveZeroOrBias) {
  std::mt19937_64 rng(2);
  for (auto a : kNeural) {
    auto net = make_network(small(a, 3, 4));
    for (auto* p : net->parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
    for (double v : net->predict(random_vector(12, rng))) EXPECT_EQ(v, 0.0) << to_string(a);
  }
  // zero LSTM but a non-zero output bias: the prediction is that bias
  LstmNet net(3, 4, 5);
  for (auto* p : net.parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
  net.fc().bias.value = {1, -2, 3};
  EXPECT_EQ(net.predict(random_vector(12, rng)), (std::vector<double>{1, -2, 3}));
}

TEST(Models, SepBpnnOutputsDependOnlyOnTheirOwnRow) {
  std::mt19937_64 rng(3);
  const std::size_t N = 5, R = 4;
  auto net = make_network(small(Arch::SepBpnn, N, R));
  auto x = random_vector(N * R, rng);
  auto base = net->predict(x);
  for (std::size_t j = 0; j < N; ++j) {
    auto x2 = x;
    for (std::size_t c = 0; c < R; ++c) x2[j * R + c] += 0.7 + 0.1 * double(c);
    auto y = net->predict(x2);
    for (std::size_t k = 0; k < N; ++k) {
      if (k == j) continue;
      EXPECT_EQ(y[k], base[k]) << "perturbing " << j << " moved " << k;
    }
  }
  // and the joint BPNN is not local
  auto joint = make_network(small(Arch::Bpnn, N, R));
  auto jb = joint->predict(x);
  auto x2 = x;
  x2[0] += 1;
  auto jy = joint->predict(x2);
  int moved = 0;
  for (std::size_t k = 1; k < N; ++k) moved += jy[k] != jb[k];
  EXPECT_GT(moved, 0);
}

TEST(Models, CnnWithDeltaKernelsIsTheLinearReadout) {
  std::mt19937_64 rng(4);
  const std::size_t N = 4, R = 3;
  CnnNet net(N, R, 1, 1, 3);
  auto delta = [](nn::Conv2d& c) {
    std::fill(c.weight.value.begin(), c.weight.value.end(), 0.0);
    c.weight.value[4] = 1;
    c.bias.value = {0};
  };
  delta(net.conv1());
  delta(net.conv2());
  net.fc().weight.value = random_vector(net.fc().weight.size(), rng);
  net.fc().bias.value = random_vector(N, rng);
  auto x = random_vector(N * R, rng, 0.1, 2.0);  // positive so both ReLUs pass it through
  std::vector<double> img(N * R), want(N);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t c = 0; c < R; ++c) img[c * N + j] = x[j * R + c];
  net.fc().forward(img, want);
  auto got = net.predict(x);
  for (std::size_t j = 0; j < N; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
}

TEST(Models, LstmWithROneIsOneCellAndFc) {
  std::mt19937_64 rng(5);
  const std::size_t N = 3, H = 4;
  LstmNet net(N, 1, H);
  testing_support::randomize(net.parameters(), rng);
  auto x = random_vector(N, rng);
  nn::LstmStep s;
  std::vector<double> zero(H, 0.0), want(N);
  net.cell().forward(x, zero, zero, s);
  net.fc().forward(s.h, want);
  EXPECT_EQ(net.predict(x), want);
}

TEST(Models, CnnLstmWithDeltaConvMatchesLstm) {
  std::mt19937_64 rng(6);
  const std::size_t N = 4, R = 5, H = 3;
  LstmNet plain(N, R, H), hybrid(N, R, H, 1, 3);
  testing_support::randomize(plain.parameters(), rng);
  hybrid.conv().weight().value = {0, 1, 0};
  hybrid.conv().bias().value = {0};
  hybrid.cell().weight.value = plain.cell().weight.value;
  hybrid.cell().bias.value = plain.cell().bias.value;
  hybrid.fc().weight.value = plain.fc().weight.value;
  hybrid.fc().bias.value = plain.fc().bias.value;
  auto x = random_vector(N * R, rng);
  EXPECT_EQ(hybrid.predict(x), plain.predict(x));
  EXPECT_EQ(hybrid.arch(), Arch::CnnLstm);
}

TEST(Models, FullArchitectureGradientCheck) {
  std::mt19937_64 rng(7);
  for (auto a : kNeural) {
    FdResult res;
    for (int cfg = 0; cfg < 4; ++cfg) {
      const std::size_t N = 2 + rng() % 3, R = 1 + rng() % 4;
      auto net = make_network(small(a, N, R));
      testing_support::randomize(net->parameters(), rng, 0.6);
      auto x = random_vector(N * R, rng), c = random_vector(N, rng);
      std::vector<double> dx(N * R);
      nn::zero_grads(net->parameters());
      net->backprop(x, readout_loss(c), dx);
      auto f = [&] {
        auto y = net->predict(x);
        double s = 0;
        for (std::size_t i = 0; i < N; ++i) s += c[i] * y[i];
        return s;
      };
      testing_support::fd_check_params(net->parameters(), f, res);
      testing_support::fd_check(x, dx, f, "x", res);
    }
    EXPECT_LT(res.worst, testing_support::kFdTolerance) << to_string(a) << " at " << res.where;
    EXPECT_GT(res.checked, 50u);
  }
}

TEST(Models, BackpropReturnsTheLossAndMatchesPredict) {
  std::mt19937_64 rng(8);
  for (auto a : kNeural) {
    auto net = make_network(small(a, 3, 3));
    auto x = random_vector(9, rng);
    auto y = net->predict(x);
    std::vector<double> seen;
    double L = net->backprop(
        x,
        [&](std::span<const double> yy, std::span<double> dy) {
          seen.assign(yy.begin(), yy.end());
          std::fill(dy.begin(), dy.end(), 0.0);
          return 42.0;
        },
        {});
    EXPECT_EQ(L, 42.0);
    EXPECT_EQ(seen, y) << to_string(a);
  }
}

TEST(Models, SameSeedSameInit) {
  for (auto a : kNeural) {
    auto n1 = make_network(small(a, 3, 2)), n2 = make_network(small(a, 3, 2));
    auto p1 = n1->parameters(), p2 = n2->parameters();
    for (std::size_t k = 0; k < p1.size(); ++k) EXPECT_EQ(p1[k]->value, p2[k]->value);
    auto c = small(a, 3, 2);
    c.seed = 99;
    EXPECT_NE(make_network(c)->parameters()[0]->value, p1[0]->value);
  }
}

TEST(Forecasters, NeuralRejectsOtherHorizonAndShape) {
  auto cfg = small(Arch::Lstm, 3, 2, 5);
  NeuralForecaster f(cfg, make_network(cfg), unit_stats(3));
  std::vector<double> in(6, 1.0);
  EXPECT_NO_THROW(f.predict(window(3, 2, 5, in, 0)));
  EXPECT_THROW(f.predict(window(3, 2, 1, in, 0)), ConfigError);
  EXPECT_THROW(f.predict(window(3, 3, 5, std::vector<double>(9), 0)), ShapeError);
  EXPECT_THROW(NeuralForecaster(cfg, make_network(cfg), unit_stats(4)), ShapeError);
}

TEST(Forecasters, NormalisationIsAppliedAndInverted) {
  // zero network with output bias b predicts mean + b * scale in vehicles
  auto cfg = small(Arch::Bpnn, 2, 1);
  auto net = make_network(cfg);
  for (auto* p : net->parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
  net->parameters()[3]->value = {1.0, -1.0};
  NeuralForecaster f(cfg, std::move(net), NormStats{{100, 50}, {10, 5}});
  EXPECT_EQ(f.predict(window(2, 1, 1, {3, 4}, 0)), (std::vector<double>{110, 45}));
}

TEST(Forecasters, SerialisationRoundTripForEveryArch) {
  std::mt19937_64 rng(9);
  const std::size_t N = 3, R = 4;
  auto x = random_vector(N * R, rng, 0, 50);
  for (auto a : kNeural) {
    auto cfg = small(a, N, R);
    auto net = make_network(cfg);
    testing_support::randomize(net->parameters(), rng);
    NeuralForecaster f(cfg, std::move(net), NormStats{{10, 20, 30}, {2, 3, 4}});
    auto back = forecaster_from_json(nlohmann::json::parse(f.to_json().dump()));
    auto w = window(N, R, 1, x, 0);
    EXPECT_EQ(back->predict(w), f.predict(w)) << to_string(a);
    EXPECT_EQ(back->arch(), a);
  }
  ArimaForecaster ar(N);
  auto back = forecaster_from_json(ar.to_json());
  auto w = window(N, R, 2, x, 0);
  EXPECT_EQ(back->predict(w), ar.predict(w));
  EXPECT_THROW(forecaster_from_json(nlohmann::json::parse(R"({"arch": "lstm"})")), SchemaError);
}

// ---------------------------------------------------------------- DPP

TEST(Dpp, EqualsTheProfileCellAndIgnoresPAndR) {
  GeneratorConfig g;
  g.topology = make_corridor(2);
  g.weeks = 2;
  auto d = generate(g);
  auto profiles = build_profiles(d.observed, {DateRange{g.start, g.start + std::chrono::days(13)}});
  DppForecaster dpp(profiles);
  EXPECT_EQ(dpp.past(), 0u);
  Minutes target = to_minutes(g.start + std::chrono::days(15)) + 8 * 60;  // a Tuesday 08:00
  std::vector<double> first;
  for (std::size_t P : {1, 5, 10})
    for (std::size_t R : {0, 3}) {
      auto w = window(profiles.size(), R, P, std::vector<double>(profiles.size() * R, 7.0), target - Minutes(P) * 3);
      auto y = dpp.predict(w);
      if (first.empty()) first = y;
      EXPECT_EQ(y, first) << "P=" << P << " R=" << R;
    }
  for (std::size_t j = 0; j < profiles.size(); ++j) EXPECT_EQ(first[j], profiles[j].cell(1, 160).mean);
  auto back = DppForecaster::from_json(dpp.to_json());
  EXPECT_EQ(back.predict_at(target), first);
}

TEST(Dpp, EmptyCellBorrowsTheNearestTi) {
  auto s = testing_support::make_series(testing_support::sid("01A"), std::vector<double>(7 * 480, 5.0));
  s.values[200] = 9;  // Monday TI 200
  s.values[202] = 11;
  s.set_missing(201);
  auto p = build_profile(s, DateRange{make_date(2017, 4, 3), make_date(2017, 4, 9)});
  DppForecaster dpp({p});
  Minutes monday = to_minutes(make_date(2017, 4, 10));
  EXPECT_EQ(dpp.predict_at(monday + 201 * 3, 0), 9);  // earlier side first
  EXPECT_EQ(dpp.predict_at(monday + 202 * 3, 0), 11);
}

// ---------------------------------------------------------------- ARIMA

TEST(Arima, LinearRampContinuesExactly) {
  std::vector<double> ramp(60);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 10 + 2.5 * double(i);
  auto fit = arima_fit(ramp);
  for (std::size_t P : {1, 3, 10}) EXPECT_NEAR(arima_predict(fit, ramp, P), 10 + 2.5 * double(59 + P), 1e-6);
}

TEST(Arima, RecoversKnownArCoefficients) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> e(0, 1);
  const double phi1 = 0.5, phi2 = -0.3;
  std::vector<double> dy(2000, 0.0), y(2001, 100.0);
  for (std::size_t t = 2; t < dy.size(); ++t) dy[t] = phi1 * dy[t - 1] + phi2 * dy[t - 2] + e(rng);
  for (std::size_t t = 0; t < dy.size(); ++t) y[t + 1] = y[t] + dy[t];
  ArimaParams cfg;
  cfg.max_history = y.size();
  auto fit = arima_fit(y, cfg);
  EXPECT_NEAR(fit.ar[0], phi1, 0.05);
  EXPECT_NEAR(fit.ar[1], phi2, 0.05);
  EXPECT_FALSE(fit.ridge);
}

TEST(Arima, RollingMatchesHandRecursion) {
  std::mt19937_64 rng(12);
  auto y = random_vector(150, rng, 20, 80);
  auto fit = arima_fit(y);
  ASSERT_EQ(fit.ar.size(), 2u);
  // hand recursion on the last 100 values
  std::vector<double> lvl(y.end() - 100, y.end());
  for (std::size_t P = 1; P <= 10; ++P) {
    std::vector<double> v = lvl;
    for (std::size_t s = 0; s < P; ++s) {
      std::size_t n = v.size();
      double d1 = v[n - 1] - v[n - 2], d2 = v[n - 2] - v[n - 3];
      v.push_back(v[n - 1] + fit.ar[0] * d1 + fit.ar[1] * d2);
    }
    EXPECT_NEAR(arima_predict(fit, y, P), v.back(), 1e-9) << "P=" << P;
  }
}

TEST(Arima, Errors) {
  std::vector<double> tiny{1, 2, 3};
  EXPECT_THROW(arima_fit(tiny), DataError);
  ArimaParams q;
  q.q = 1;
  EXPECT_THROW(arima_fit(std::vector<double>(20, 1.0), q), ConfigError);
  auto flat = arima_fit(std::vector<double>(20, 4.0));  // all-zero differences
  EXPECT_EQ(arima_predict(flat, std::vector<double>(20, 4.0), 3), 4.0);
  EXPECT_THROW(arima_predict(ArimaParams{}, std::vector<double>(20, 4.0), 1), ConfigError);
}

TEST(Arima, ForecasterClampsAtZeroAndServesEveryP) {
  const std::size_t N = 1, R = 30;
  std::vector<double> down(R);
  for (std::size_t i = 0; i < R; ++i) down[i] = 29 - double(i);  // reaches 0, the next step is below
  ArimaForecaster f(N);
  EXPECT_EQ(f.predict(window(N, R, 1, down, 0))[0], 0.0);
  EXPECT_EQ(f.predict(window(N, R, 10, down, 0))[0], 0.0);
  std::vector<double> up(R);
  for (std::size_t i = 0; i < R; ++i) up[i] = double(i);
  EXPECT_NEAR(f.predict(window(N, R, 4, up, 0))[0], double(R - 1 + 4), 1e-6);
}
