#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "mflow/error.hpp"
#include "mflow/numcore/tensor.hpp"

// Layers keep parameters only. Forward passes are const and allocation-free so a
// frozen model can serve concurrent inference; the caller keeps whatever inputs the
// backward pass needs. Backward passes accumulate into the parameter gradients.

namespace mflow::nn {

inline void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(want) + " values, got " +
                     std::to_string(got));
}

/// out = W in + b, W is out x in.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out)
      : in_(in), out_(out), weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  /// Uniform in +-1/sqrt(fan_in).
  void init(Rng& rng) {
    double b = 1.0 / std::sqrt(static_cast<double>(in_));
    weight.init_uniform(b, rng);
    bias.init_uniform(b, rng);
  }

  void forward(std::span<const double> x, std::span<double> y) const {
    check_size(x.size(), in_, "dense input");
    check_size(y.size(), out_, "dense output");
    const double* w = weight.value.data();
    for (std::size_t o = 0; o < out_; ++o) y[o] = bias.value[o] + dot({w + o * in_, in_}, x);
  }

  /// dx may be empty when the input gradient is not needed.
  void backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
    check_size(x.size(), in_, "dense input");
    check_size(dy.size(), out_, "dense output grad");
    double* gw = weight.grad.data();
    const double* w = weight.value.data();
    if (!dx.empty()) {
      check_size(dx.size(), in_, "dense input grad");
      std::fill(dx.begin(), dx.end(), 0.0);
    }
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      bias.grad[o] += g;
      axpy(g, x, {gw + o * in_, in_});
      if (!dx.empty()) axpy(g, {w + o * in_, in_}, dx);
    }
  }

  ParamList parameters() { return {&weight, &bias}; }

 private:
  std::size_t in_ = 0, out_ = 0;

 public:
  Tensor weight, bias;
};

/// max(x, 0); the subgradient at 0 is 0.
inline void relu_forward(std::span<const double> x, std::span<double> y) {
  check_size(y.size(), x.size(), "relu output");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

/// `x` is the forward input.
inline void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  check_size(dy.size(), x.size(), "relu grad");
  check_size(dx.size(), x.size(), "relu input grad");
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

/// 2-D cross-correlation, stride 1, "same" zero padding (odd kernel sizes).
/// Input and output are channels x rows x cols, row-major.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw),
        weight(name + ".weight", {out_ch, in_ch, kh, kw}), bias(name + ".bias", {out_ch}) {
    if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("same padding needs odd kernel sizes");
  }

  std::size_t in_channels() const { return in_ch_; }
  std::size_t out_channels() const { return out_ch_; }

  void init(Rng& rng) {
    double b = 1.0 / std::sqrt(static_cast<double>(in_ch_ * kh_ * kw_));
    weight.init_uniform(b, rng);
    bias.init_uniform(b, rng);
  }

  void forward(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<double> y) const {
    check_size(x.size(), in_ch_ * rows * cols, "conv2d input");
    check_size(y.size(), out_ch_ * rows * cols, "conv2d output");
    const std::size_t plane = rows * cols;
    for (std::size_t oc = 0; oc < out_ch_; ++oc)
      std::fill_n(y.begin() + static_cast<std::ptrdiff_t>(oc * plane), plane, bias.value[oc]);
    visit(rows, cols, [&](std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx, std::size_t yo,
                          std::size_t yi, std::size_t x0, std::size_t xi0, std::size_t len) {
      const double w = weight.value[widx(oc, ic, ky, kx)];
      const double* src = x.data() + ic * plane + yi * cols + xi0;
      double* dst = y.data() + oc * plane + yo * cols + x0;
      for (std::size_t k = 0; k < len; ++k) dst[k] += w * src[k];
    });
  }

  void backward(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<const double> dy,
                std::span<double> dx) {
    check_size(x.size(), in_ch_ * rows * cols, "conv2d input");
    check_size(dy.size(), out_ch_ * rows * cols, "conv2d output grad");
    const std::size_t plane = rows * cols;
    if (!dx.empty()) {
      check_size(dx.size(), x.size(), "conv2d input grad");
      std::fill(dx.begin(), dx.end(), 0.0);
    }
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
      double s = 0;
      for (std::size_t k = 0; k < plane; ++k) s += dy[oc * plane + k];
      bias.grad[oc] += s;
    }
    visit(rows, cols, [&](std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx, std::size_t yo,
                          std::size_t yi, std::size_t x0, std::size_t xi0, std::size_t len) {
      const std::size_t wi = widx(oc, ic, ky, kx);
      const double* g = dy.data() + oc * plane + yo * cols + x0;
      const double* src = x.data() + ic * plane + yi * cols + xi0;
      double acc = 0;
      for (std::size_t k = 0; k < len; ++k) acc += g[k] * src[k];
      weight.grad[wi] += acc;
      if (!dx.empty()) {
        const double w = weight.value[wi];
        double* d = dx.data() + ic * plane + yi * cols + xi0;
        for (std::size_t k = 0; k < len; ++k) d[k] += w * g[k];
      }
    });
  }

  ParamList parameters() { return {&weight, &bias}; }

 private:
  std::size_t widx(std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx) const {
    return ((oc * in_ch_ + ic) * kh_ + ky) * kw_ + kx;
  }

  // Calls f for every (kernel tap, output row) with the contiguous run of output
  // columns whose input column stays inside the image.
  template <typename F>
  void visit(std::size_t rows, std::size_t cols, F&& f) const {
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh_ / 2), pw = static_cast<std::ptrdiff_t>(kw_ / 2);
    const auto R = static_cast<std::ptrdiff_t>(rows), C = static_cast<std::ptrdiff_t>(cols);
    for (std::size_t oc = 0; oc < out_ch_; ++oc)
      for (std::size_t ic = 0; ic < in_ch_; ++ic)
        for (std::size_t ky = 0; ky < kh_; ++ky) {
          const std::ptrdiff_t dyo = static_cast<std::ptrdiff_t>(ky) - ph;
          for (std::size_t kx = 0; kx < kw_; ++kx) {
            const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pw;
            const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dxo);
            const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(C, C - dxo);
            if (x1 <= x0) continue;
            for (std::ptrdiff_t yo = 0; yo < R; ++yo) {
              const std::ptrdiff_t yi = yo + dyo;
              if (yi < 0 || yi >= R) continue;
              f(oc, ic, ky, kx, static_cast<std::size_t>(yo), static_cast<std::size_t>(yi),
                static_cast<std::size_t>(x0), static_cast<std::size_t>(x0 + dxo),
                static_cast<std::size_t>(x1 - x0));
            }
          }
        }
  }

  std::size_t in_ch_ = 0, out_ch_ = 0, kh_ = 1, kw_ = 1;

 public:
  Tensor weight, bias;
};

/// 1-D cross-correlation along one axis, stride 1, "same" zero padding.
/// Input and output are channels x length.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k)
      : impl_(std::move(name), in_ch, out_ch, 1, k) {}

  std::size_t in_channels() const { return impl_.in_channels(); }
  std::size_t out_channels() const { return impl_.out_channels(); }

  void init(Rng& rng) { impl_.init(rng); }

  void forward(std::span<const double> x, std::size_t length, std::span<double> y) const {
    impl_.forward(x, 1, length, y);
  }

  void backward(std::span<const double> x, std::size_t length, std::span<const double> dy, std::span<double> dx) {
    impl_.backward(x, 1, length, dy, dx);
  }

  Tensor& weight() { return impl_.weight; }
  Tensor& bias() { return impl_.bias; }
  ParamList parameters() { return impl_.parameters(); }

 private:
  Conv2d impl_;
};

}  // namespace mflow::nn
