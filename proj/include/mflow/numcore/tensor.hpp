#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/random.hpp"

namespace mflow::nn {

/// Dense row-major array of doubles with a gradient buffer of the same shape.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::string n, std::vector<std::size_t> s)
      : name(std::move(n)), shape(std::move(s)), value(element_count(shape), 0.0), grad(value.size(), 0.0) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  /// Uniform in [-bound, bound].
  void init_uniform(double bound, Rng& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : value) v = u(rng);
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

using ParamList = std::vector<Tensor*>;

inline void zero_grads(const ParamList& ps) {
  for (auto* p : ps) p->zero_grad();
}

inline std::size_t parameter_count(const ParamList& ps) {
  std::size_t n = 0;
  for (auto* p : ps) n += p->size();
  return n;
}

/// Snapshot of parameter values, used for best-epoch checkpoints.
using ParamSnapshot = std::vector<std::vector<double>>;

inline ParamSnapshot snapshot(const ParamList& ps) {
  ParamSnapshot s;
  s.reserve(ps.size());
  for (auto* p : ps) s.push_back(p->value);
  return s;
}

inline void restore(const ParamList& ps, const ParamSnapshot& s) {
  if (s.size() != ps.size()) throw ShapeError("snapshot does not match parameter list");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (s[i].size() != ps[i]->size()) throw ShapeError("snapshot size mismatch for " + ps[i]->name);
    ps[i]->value = s[i];
  }
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* xp = x.data();
  double* yp = y.data();
  for (std::size_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace mflow::nn
