#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/error.hpp"

namespace mflow {

// ARIMA(p, d, 0) by conditional least squares, one series at a time.
// With q = 0 the model is an AR(p) on the d-times differenced series, fitted without
// an intercept. Multi-step forecasts roll: each one-step prediction is appended to the
// differenced history before the next step, then the result is integrated d times.

struct ArimaParams {
  std::size_t p = 2;
  std::size_t d = 1;
  std::size_t q = 0;
  std::size_t max_history = 100;
  std::vector<double> ar;  // phi_1 .. phi_p
  bool ridge = false;      // normal equations were singular and got the ridge term

  nlohmann::json to_json() const {
    return {{"p", p}, {"d", d}, {"q", q}, {"max_history", max_history}, {"ar", ar}, {"ridge", ridge}};
  }
  static ArimaParams from_json(const nlohmann::json& j) {
    ArimaParams a;
    a.p = j.value("p", a.p);
    a.d = j.value("d", a.d);
    a.q = j.value("q", a.q);
    a.max_history = j.value("max_history", a.max_history);
    if (j.contains("ar")) a.ar = j.at("ar").get<std::vector<double>>();
    a.ridge = j.value("ridge", false);
    return a;
  }
};

inline constexpr double kArimaRidge = 1e-8;

namespace detail {

inline std::vector<double> difference(std::span<const double> x, std::size_t d) {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < d; ++k) {
    if (y.size() < 2) return {};
    for (std::size_t i = 0; i + 1 < y.size(); ++i) y[i] = y[i + 1] - y[i];
    y.pop_back();
  }
  return y;
}

/// Solves A x = b (n x n, row-major) by Gaussian elimination with partial pivoting.
/// Returns false if a pivot is (relatively) zero.
inline bool solve_linear(std::vector<double> A, std::vector<double> b, std::size_t n, std::vector<double>& x) {
  double scale = 0;
  for (double v : A) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-12 * (scale > 0 ? scale : 1.0);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (std::abs(A[piv * n + col]) <= tiny) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(A[col * n + k], A[piv * n + k]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = A[r * n + col] / A[col * n + col];
      for (std::size_t k = col; k < n; ++k) A[r * n + k] -= f * A[col * n + k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= A[r * n + k] * x[k];
    x[r] = s / A[r * n + r];
  }
  return true;
}

}  // namespace detail

/// Fits the AR coefficients on the last `max_history` values of `series`.
inline ArimaParams arima_fit(std::span<const double> series, ArimaParams cfg = {}) {
  if (cfg.q != 0) throw ConfigError("only q = 0 is supported");
  if (cfg.p < 1) throw ConfigError("ARIMA needs p >= 1");
  const std::size_t need = cfg.p + cfg.d + 1;
  if (cfg.max_history < need) throw ConfigError("max_history shorter than p + d + 1");
  if (series.size() < need)
    throw DataError("ARIMA needs at least " + std::to_string(need) + " values, got " + std::to_string(series.size()));
  auto hist = series.last(std::min(series.size(), cfg.max_history));
  auto y = detail::difference(hist, cfg.d);
  const std::size_t p = cfg.p, m = y.size();

  // Normal equations of y_t = sum_k phi_k y_{t-k}, t = p .. m-1.
  std::vector<double> A(p * p, 0.0), b(p, 0.0);
  for (std::size_t t = p; t < m; ++t)
    for (std::size_t a = 0; a < p; ++a) {
      b[a] += y[t] * y[t - 1 - a];
      for (std::size_t c = 0; c < p; ++c) A[a * p + c] += y[t - 1 - a] * y[t - 1 - c];
    }
  cfg.ridge = false;
  if (!detail::solve_linear(A, b, p, cfg.ar)) {
    for (std::size_t a = 0; a < p; ++a) A[a * p + a] += kArimaRidge;
    cfg.ridge = true;
    if (!detail::solve_linear(A, b, p, cfg.ar)) cfg.ar.assign(p, 0.0);  // all-zero history
  }
  return cfg;
}

/// Forecast `horizon` steps past the end of `series` with fitted params, rolling one
/// step at a time. Uses the same trailing window the fit used.
inline double arima_predict(const ArimaParams& params, std::span<const double> series, std::size_t horizon) {
  if (horizon < 1) throw ConfigError("prediction horizon must be >= 1");
  if (params.ar.size() != params.p) throw ConfigError("ARIMA params are not fitted");
  auto hist = series.last(std::min(series.size(), params.max_history));
  if (hist.size() < params.p + params.d + 1) throw DataError("not enough history for ARIMA prediction");

  // Last value of each differencing level 0..d-1, for integration.
  std::vector<std::vector<double>> levels{std::vector<double>(hist.begin(), hist.end())};
  for (std::size_t k = 0; k < params.d; ++k) levels.push_back(detail::difference(levels.back(), 1));
  std::vector<double> y = levels.back();
  std::vector<double> last(params.d);
  for (std::size_t k = 0; k < params.d; ++k) last[k] = levels[k].back();

  double value = 0;
  for (std::size_t s = 0; s < horizon; ++s) {
    double next = 0;
    for (std::size_t k = 0; k < params.p; ++k) next += params.ar[k] * y[y.size() - 1 - k];
    y.push_back(next);
    // integrate from the deepest level up
    double v = next;
    for (std::size_t k = params.d; k-- > 0;) {
      last[k] += v;
      v = last[k];
    }
    value = params.d ? last[0] : next;
  }
  return value;
}

}  // namespace mflow
