#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mflow/numcore/tensor.hpp"
#include "mflow/series.hpp"
#include "mflow/time.hpp"

namespace testing_support {

using namespace mflow;

inline constexpr double kFdStep = 1e-4;
inline constexpr double kFdTolerance = 1e-4;

inline double rel_err(double a, double n) { return std::abs(a - n) / std::max({1e-6, std::abs(a), std::abs(n)}); }

struct FdResult {
  double worst = 0;
  std::string where;
  std::size_t checked = 0;
};

/// Central differences of a scalar function over every entry of `v`, against `analytic`.
inline void fd_check(std::vector<double>& v, const std::vector<double>& analytic, const std::function<double()>& f,
                     const std::string& label, FdResult& res) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + kFdStep;
    const double up = f();
    v[i] = keep - kFdStep;
    const double down = f();
    v[i] = keep;
    const double num = (up - down) / (2 * kFdStep);
    const double e = rel_err(analytic[i], num);
    ++res.checked;
    if (e > res.worst) {
      res.worst = e;
      res.where = label + "[" + std::to_string(i) + "]";
    }
  }
}

inline void fd_check_params(const nn::ParamList& ps, const std::function<double()>& f, FdResult& res) {
  for (auto* p : ps) fd_check(p->value, p->grad, f, p->name, res);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline void randomize(const nn::ParamList& ps, std::mt19937_64& rng, double scale = 0.5) {
  for (auto* p : ps) p->value = random_vector(p->size(), rng, -scale, scale);
}

/// Series for station `id` starting at `start` with the given values.
inline FlowSeries make_series(StationId id, std::vector<double> v, Minutes start = to_minutes(make_date(2017, 4, 3))) {
  return FlowSeries(id, start, std::move(v));
}

inline StationId sid(const char* s) { return StationId::parse(s); }

}  // namespace testing_support
