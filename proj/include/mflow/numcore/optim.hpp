#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/numcore/tensor.hpp"

namespace mflow::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-8;  // added to the gradient as l2 * w
};

/// Adam with bias correction. Moments live here, one pair per parameter tensor.
class Adam {
 public:
  Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return t_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i] + cfg_.l2 * p.value[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1, vhat = v[i] / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Plain SGD with the same L2 term; kept only as a comparator for Adam.
class Sgd {
 public:
  Sgd(ParamList params, double lr, double l2 = 0.0) : params_(std::move(params)), lr_(lr), l2_(l2) {}

  void step() {
    for (auto* p : params_)
      for (std::size_t i = 0; i < p->size(); ++i) p->value[i] -= lr_ * (p->grad[i] + l2_ * p->value[i]);
  }

 private:
  ParamList params_;
  double lr_, l2_;
};

/// Mean squared error over the elements; writes d loss / d pred into `grad`.
inline double mse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("mse: size mismatch or empty");
  const double n = static_cast<double>(pred.size());
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
    if (!grad.empty()) grad[i] = 2.0 * d / n;
  }
  return s / n;
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  return mse_loss(pred, target, {});
}

}  // namespace mflow::nn
