#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mflow/numcore/layers.hpp"
#include "mflow/numcore/tensor.hpp"

namespace mflow::nn {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// Everything the backward pass of one LSTM step needs.
struct LstmStep {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, g, o;  // gate activations
  std::vector<double> c, tanh_c, h;
};

/// Standard LSTM cell:
///   [i f g o] = W [x; h] + b,  i,f,o = sigmoid, g = tanh
///   c' = f*c + i*g,  h' = o*tanh(c')
/// The unit's output vector equals h'. W is 4H x (I+H), gate blocks in order i, f, g, o.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(std::string name, std::size_t input, std::size_t hidden)
      : in_(input), hid_(hidden), weight(name + ".weight", {4 * hidden, input + hidden}),
        bias(name + ".bias", {4 * hidden}) {}

  std::size_t input_size() const { return in_; }
  std::size_t hidden_size() const { return hid_; }

  void init(Rng& rng) {
    double b = 1.0 / std::sqrt(static_cast<double>(in_ + hid_));
    weight.init_uniform(b, rng);
    bias.init_uniform(b, rng);
  }

  /// One step; fills `step` with the cache and the new state (step.c, step.h).
  void forward(std::span<const double> x, std::span<const double> h, std::span<const double> c,
               LstmStep& step) const {
    check_size(x.size(), in_, "lstm input");
    check_size(h.size(), hid_, "lstm hidden");
    check_size(c.size(), hid_, "lstm cell");
    const std::size_t H = hid_, cols = in_ + hid_;
    step.x.assign(x.begin(), x.end());
    step.h_prev.assign(h.begin(), h.end());
    step.c_prev.assign(c.begin(), c.end());
    for (auto* v : {&step.i, &step.f, &step.g, &step.o, &step.c, &step.tanh_c, &step.h}) v->resize(H);
    const double* w = weight.value.data();
    for (std::size_t k = 0; k < 4 * H; ++k) {
      const double* row = w + k * cols;
      double z = bias.value[k] + dot({row, in_}, x) + dot({row + in_, hid_}, h);
      std::size_t gate = k / H, u = k % H;
      switch (gate) {
        case 0: step.i[u] = sigmoid(z); break;
        case 1: step.f[u] = sigmoid(z); break;
        case 2: step.g[u] = std::tanh(z); break;
        default: step.o[u] = sigmoid(z); break;
      }
    }
    for (std::size_t u = 0; u < H; ++u) {
      step.c[u] = step.f[u] * c[u] + step.i[u] * step.g[u];
      step.tanh_c[u] = std::tanh(step.c[u]);
      step.h[u] = step.o[u] * step.tanh_c[u];
    }
  }

  /// Given dL/dh' and dL/dc', accumulates parameter gradients and writes dL/dx,
  /// dL/dh, dL/dc (dx may be empty).
  void backward(const LstmStep& s, std::span<const double> dh_next, std::span<const double> dc_next,
                std::span<double> dx, std::span<double> dh, std::span<double> dc) {
    const std::size_t H = hid_, cols = in_ + hid_;
    std::vector<double> dz(4 * H);
    for (std::size_t u = 0; u < H; ++u) {
      double dct = dc_next[u] + dh_next[u] * s.o[u] * (1.0 - s.tanh_c[u] * s.tanh_c[u]);
      double d_o = dh_next[u] * s.tanh_c[u];
      double d_i = dct * s.g[u];
      double d_g = dct * s.i[u];
      double d_f = dct * s.c_prev[u];
      dc[u] = dct * s.f[u];
      dz[u] = d_i * s.i[u] * (1.0 - s.i[u]);
      dz[H + u] = d_f * s.f[u] * (1.0 - s.f[u]);
      dz[2 * H + u] = d_g * (1.0 - s.g[u] * s.g[u]);
      dz[3 * H + u] = d_o * s.o[u] * (1.0 - s.o[u]);
    }
    if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
    std::fill(dh.begin(), dh.end(), 0.0);
    const double* w = weight.value.data();
    double* gw = weight.grad.data();
    for (std::size_t k = 0; k < 4 * H; ++k) {
      const double g = dz[k];
      if (g == 0.0) continue;
      bias.grad[k] += g;
      axpy(g, s.x, {gw + k * cols, in_});
      axpy(g, s.h_prev, {gw + k * cols + in_, hid_});
      if (!dx.empty()) axpy(g, {w + k * cols, in_}, dx);
      axpy(g, {w + k * cols + in_, hid_}, dh);
    }
  }

  ParamList parameters() { return {&weight, &bias}; }

 private:
  std::size_t in_ = 0, hid_ = 0;

 public:
  Tensor weight, bias;
};

}  // namespace mflow::nn
