#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/error.hpp"
#include "mflow/numcore/layers.hpp"
#include "mflow/numcore/lstm.hpp"
#include "mflow/numcore/tensor.hpp"
#include "mflow/random.hpp"

namespace mflow {

enum class Arch { Bpnn, SepBpnn, Cnn, Lstm, CnnLstm, Dpp, Arima };

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::Bpnn: return "bpnn";
    case Arch::SepBpnn: return "sep-bpnn";
    case Arch::Cnn: return "cnn";
    case Arch::Lstm: return "lstm";
    case Arch::CnnLstm: return "cnn-lstm";
    case Arch::Dpp: return "dpp";
    case Arch::Arima: return "arima";
  }
  return "?";
}

inline Arch parse_arch(const std::string& s) {
  for (Arch a : {Arch::Bpnn, Arch::SepBpnn, Arch::Cnn, Arch::Lstm, Arch::CnnLstm, Arch::Dpp, Arch::Arima})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown architecture '" + s + "'");
}

inline bool is_neural(Arch a) { return a != Arch::Dpp && a != Arch::Arima; }

struct ModelConfig {
  Arch arch = Arch::Lstm;
  std::size_t stations = 0;  // N
  std::size_t R = 6;
  std::size_t P = 1;
  std::size_t bpnn_hidden = 256;
  std::size_t sep_hidden = 10;
  std::size_t cnn_channels1 = 16;
  std::size_t cnn_channels2 = 32;
  std::size_t cnn_kernel = 3;
  std::size_t lstm_hidden = 64;
  std::size_t cnn_lstm_channels = 8;
  std::size_t cnn_lstm_kernel = 3;
  std::uint64_t seed = 1;
  std::size_t max_R = 30, max_P = 10;

  void validate() const {
    if (stations < 1) throw ConfigError("model needs at least one station");
    if (R < 1 || R > max_R) throw ConfigError("R must be in [1," + std::to_string(max_R) + "]");
    if (P < 1 || P > max_P) throw ConfigError("P must be in [1," + std::to_string(max_P) + "]");
    for (auto v : {bpnn_hidden, sep_hidden, cnn_channels1, cnn_channels2, lstm_hidden, cnn_lstm_channels})
      if (v < 1) throw ConfigError("layer sizes must be positive");
    if (cnn_kernel % 2 == 0 || cnn_lstm_kernel % 2 == 0) throw ConfigError("kernel sizes must be odd");
  }

  nlohmann::json to_json() const {
    return {{"arch", to_string(arch)},          {"stations", stations},
            {"R", R},                           {"P", P},
            {"bpnn_hidden", bpnn_hidden},       {"sep_hidden", sep_hidden},
            {"cnn_channels1", cnn_channels1},   {"cnn_channels2", cnn_channels2},
            {"cnn_kernel", cnn_kernel},         {"lstm_hidden", lstm_hidden},
            {"cnn_lstm_channels", cnn_lstm_channels}, {"cnn_lstm_kernel", cnn_lstm_kernel},
            {"seed", seed}};
  }

  /// Reads the keys present in `j`; absent keys keep their current value.
  void merge_json(const nlohmann::json& j) {
    auto get = [&](const char* k, auto& v) {
      if (j.contains(k)) v = j.at(k).get<std::decay_t<decltype(v)>>();
    };
    if (j.contains("arch")) arch = parse_arch(j.at("arch").get<std::string>());
    get("stations", stations);
    get("R", R);
    get("P", P);
    get("bpnn_hidden", bpnn_hidden);
    get("sep_hidden", sep_hidden);
    get("cnn_channels1", cnn_channels1);
    get("cnn_channels2", cnn_channels2);
    get("cnn_kernel", cnn_kernel);
    get("lstm_hidden", lstm_hidden);
    get("cnn_lstm_channels", cnn_lstm_channels);
    get("cnn_lstm_kernel", cnn_lstm_kernel);
    get("seed", seed);
  }
};

/// Returns the loss for prediction y and writes dL/dy.
using LossFn = std::function<double(std::span<const double> y, std::span<double> dy)>;

/// A differentiable predictor on normalised data. Input is the N x R window,
/// station-major (row j = station j, column c = TI t-R+1+c); output is the N-vector.
class Network {
 public:
  virtual ~Network() = default;

  virtual Arch arch() const = 0;
  virtual std::size_t stations() const = 0;
  virtual std::size_t past() const = 0;

  /// Thread-safe on a frozen network.
  virtual void predict(std::span<const double> x, std::span<double> y) const = 0;

  /// Forward pass, loss, backward pass. Parameter gradients are accumulated; the input
  /// gradient is written to dx unless dx is empty. Returns the loss.
  virtual double backprop(std::span<const double> x, const LossFn& loss, std::span<double> dx) = 0;

  virtual nn::ParamList parameters() = 0;
  virtual std::unique_ptr<Network> clone() const = 0;

  std::vector<double> predict(std::span<const double> x) const {
    std::vector<double> y(stations());
    predict(x, y);
    return y;
  }

 protected:
  void check_input(std::span<const double> x) const {
    nn::check_size(x.size(), stations() * past(), "network input");
  }
};

/// FC(R*N -> H) -> ReLU -> FC(H -> N)
class BpnnNet final : public Network {
 public:
  using Network::predict;
  BpnnNet(std::size_t N, std::size_t R, std::size_t hidden)
      : N_(N), R_(R), fc1_("fc1", N * R, hidden), fc2_("fc2", hidden, N) {}

  Arch arch() const override { return Arch::Bpnn; }
  std::size_t stations() const override { return N_; }
  std::size_t past() const override { return R_; }

  void init(Rng& rng) {
    fc1_.init(rng);
    fc2_.init(rng);
  }

  void predict(std::span<const double> x, std::span<double> y) const override {
    check_input(x);
    std::vector<double> a(fc1_.out_features()), r(a.size());
    fc1_.forward(x, a);
    nn::relu_forward(a, r);
    fc2_.forward(r, y);
  }

  double backprop(std::span<const double> x, const LossFn& loss, std::span<double> dx) override {
    check_input(x);
    std::vector<double> a(fc1_.out_features()), r(a.size()), y(N_), dy(N_), dr(a.size()), da(a.size());
    fc1_.forward(x, a);
    nn::relu_forward(a, r);
    fc2_.forward(r, y);
    double L = loss(y, dy);
    fc2_.backward(r, dy, dr);
    nn::relu_backward(a, dr, da);
    fc1_.backward(x, da, dx);
    return L;
  }

  nn::ParamList parameters() override { return {&fc1_.weight, &fc1_.bias, &fc2_.weight, &fc2_.bias}; }
  std::unique_ptr<Network> clone() const override { return std::make_unique<BpnnNet>(*this); }

 private:
  std::size_t N_, R_;
  nn::Dense fc1_, fc2_;
};

/// N independent BPNNs; sub-model j sees only station j's R values and predicts station j.
class SepBpnnNet final : public Network {
 public:
  using Network::predict;
  SepBpnnNet(std::size_t N, std::size_t R, std::size_t hidden) : N_(N), R_(R) {
    for (std::size_t j = 0; j < N; ++j) {
      auto p = "station" + std::to_string(j);
      fc1_.emplace_back(p + ".fc1", R, hidden);
      fc2_.emplace_back(p + ".fc2", hidden, 1);
    }
  }

  Arch arch() const override { return Arch::SepBpnn; }
  std::size_t stations() const override { return N_; }
  std::size_t past() const override { return R_; }

  void init(Rng& rng) {
    for (std::size_t j = 0; j < N_; ++j) {
      fc1_[j].init(rng);
      fc2_[j].init(rng);
    }
  }

  void predict(std::span<const double> x, std::span<double> y) const override {
    check_input(x);
    const std::size_t H = fc1_.front().out_features();
    std::vector<double> a(H), r(H);
    for (std::size_t j = 0; j < N_; ++j) {
      fc1_[j].forward(x.subspan(j * R_, R_), a);
      nn::relu_forward(a, r);
      fc2_[j].forward(r, y.subspan(j, 1));
    }
  }

  double backprop(std::span<const double> x, const LossFn& loss, std::span<double> dx) override {
    check_input(x);
    const std::size_t H = fc1_.front().out_features();
    std::vector<double> a(N_ * H), r(N_ * H), y(N_), dy(N_), dr(H), da(H);
    for (std::size_t j = 0; j < N_; ++j) {
      std::span<double> aj(a.data() + j * H, H), rj(r.data() + j * H, H);
      fc1_[j].forward(x.subspan(j * R_, R_), aj);
      nn::relu_forward(aj, rj);
      fc2_[j].forward(rj, std::span<double>(y).subspan(j, 1));
    }
    double L = loss(y, dy);
    for (std::size_t j = 0; j < N_; ++j) {
      std::span<double> aj(a.data() + j * H, H), rj(r.data() + j * H, H);
      fc2_[j].backward(rj, std::span<const double>(dy).subspan(j, 1), dr);
      nn::relu_backward(aj, dr, da);
      fc1_[j].backward(x.subspan(j * R_, R_), da, dx.empty() ? dx : dx.subspan(j * R_, R_));
    }
    return L;
  }

  nn::ParamList parameters() override {
    nn::ParamList ps;
    for (std::size_t j = 0; j < N_; ++j)
      for (auto* p : {&fc1_[j].weight, &fc1_[j].bias, &fc2_[j].weight, &fc2_[j].bias}) ps.push_back(p);
    return ps;
  }
  std::unique_ptr<Network> clone() const override { return std::make_unique<SepBpnnNet>(*this); }

 private:
  std::size_t N_, R_;
  std::vector<nn::Dense> fc1_, fc2_;
};

/// Input as a 1 x R x N image: conv -> ReLU -> conv -> ReLU -> flatten -> FC(-> N).
class CnnNet final : public Network {
 public:
  using Network::predict;
  CnnNet(std::size_t N, std::size_t R, std::size_t c1, std::size_t c2, std::size_t k)
      : N_(N), R_(R), conv1_("conv1", 1, c1, k, k), conv2_("conv2", c1, c2, k, k), fc_("fc", c2 * R * N, N) {}

  Arch arch() const override { return Arch::Cnn; }
  std::size_t stations() const override { return N_; }
  std::size_t past() const override { return R_; }

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    fc_.init(rng);
  }

  void predict(std::span<const double> x, std::span<double> y) const override {
    check_input(x);
    Buffers b(*this);
    to_image(x, b.img);
    forward(b);
    fc_.forward(b.r2, y);
  }

  double backprop(std::span<const double> x, const LossFn& loss, std::span<double> dx) override {
    check_input(x);
    Buffers b(*this);
    to_image(x, b.img);
    forward(b);
    std::vector<double> y(N_), dy(N_);
    fc_.forward(b.r2, y);
    double L = loss(y, dy);
    std::vector<double> dr2(b.r2.size()), da2(b.r2.size()), dr1(b.r1.size()), da1(b.r1.size());
    fc_.backward(b.r2, dy, dr2);
    nn::relu_backward(b.a2, dr2, da2);
    conv2_.backward(b.r1, R_, N_, da2, dr1);
    nn::relu_backward(b.a1, dr1, da1);
    if (dx.empty()) {
      conv1_.backward(b.img, R_, N_, da1, {});
    } else {
      std::vector<double> dimg(b.img.size());
      conv1_.backward(b.img, R_, N_, da1, dimg);
      for (std::size_t j = 0; j < N_; ++j)
        for (std::size_t c = 0; c < R_; ++c) dx[j * R_ + c] = dimg[c * N_ + j];
    }
    return L;
  }

  nn::ParamList parameters() override {
    return {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias, &fc_.weight, &fc_.bias};
  }
  std::unique_ptr<Network> clone() const override { return std::make_unique<CnnNet>(*this); }

  nn::Conv2d& conv1() { return conv1_; }
  nn::Conv2d& conv2() { return conv2_; }
  nn::Dense& fc() { return fc_; }

 private:
  struct Buffers {
    explicit Buffers(const CnnNet& n)
        : img(n.R_ * n.N_), a1(n.conv1_.out_channels() * n.R_ * n.N_), r1(a1.size()),
          a2(n.conv2_.out_channels() * n.R_ * n.N_), r2(a2.size()) {}
    std::vector<double> img, a1, r1, a2, r2;
  };

  // station-major N x R -> image rows = time, cols = station
  void to_image(std::span<const double> x, std::vector<double>& img) const {
    for (std::size_t j = 0; j < N_; ++j)
      for (std::size_t c = 0; c < R_; ++c) img[c * N_ + j] = x[j * R_ + c];
  }

  void forward(Buffers& b) const {
    conv1_.forward(b.img, R_, N_, b.a1);
    nn::relu_forward(b.a1, b.r1);
    conv2_.forward(b.r1, R_, N_, b.a2);
    nn::relu_forward(b.a2, b.r2);
  }

  std::size_t N_, R_;
  nn::Conv2d conv1_, conv2_;
  nn::Dense fc_;
};

/// R chained LSTM steps over the columns of the window (oldest first), sharing one
/// cell; the last output goes through FC(H -> N). With conv_channels > 0 each column
/// first passes through a width-k 1-D convolution along the station axis (CNN-LSTM).
class LstmNet final : public Network {
 public:
  using Network::predict;
  LstmNet(std::size_t N, std::size_t R, std::size_t hidden, std::size_t conv_channels = 0, std::size_t k = 3)
      : N_(N), R_(R), conv_ch_(conv_channels),
        conv_(conv_channels ? nn::Conv1d("conv", 1, conv_channels, k) : nn::Conv1d()),
        cell_("lstm", conv_channels ? conv_channels * N : N, hidden), fc_("fc", hidden, N) {}

  Arch arch() const override { return conv_ch_ ? Arch::CnnLstm : Arch::Lstm; }
  std::size_t stations() const override { return N_; }
  std::size_t past() const override { return R_; }

  void init(Rng& rng) {
    if (conv_ch_) conv_.init(rng);
    cell_.init(rng);
    fc_.init(rng);
  }

  void predict(std::span<const double> x, std::span<double> y) const override {
    check_input(x);
    const std::size_t H = cell_.hidden_size();
    std::vector<double> h(H, 0.0), c(H, 0.0), col(N_), feat(cell_.input_size());
    nn::LstmStep step;
    for (std::size_t t = 0; t < R_; ++t) {
      column(x, t, col);
      if (conv_ch_)
        conv_.forward(col, N_, feat);
      else
        feat = col;
      cell_.forward(feat, h, c, step);
      h = step.h;
      c = step.c;
    }
    fc_.forward(h, y);
  }

  double backprop(std::span<const double> x, const LossFn& loss, std::span<double> dx) override {
    check_input(x);
    const std::size_t H = cell_.hidden_size(), I = cell_.input_size();
    std::vector<std::vector<double>> cols(R_, std::vector<double>(N_));
    std::vector<nn::LstmStep> steps(R_);
    std::vector<double> h(H, 0.0), c(H, 0.0), feat(I);
    for (std::size_t t = 0; t < R_; ++t) {
      column(x, t, cols[t]);
      if (conv_ch_)
        conv_.forward(cols[t], N_, feat);
      else
        feat = cols[t];
      cell_.forward(feat, h, c, steps[t]);
      h = steps[t].h;
      c = steps[t].c;
    }
    std::vector<double> y(N_), dy(N_);
    fc_.forward(h, y);
    double L = loss(y, dy);

    std::vector<double> dh(H), dc(H, 0.0), dh_prev(H), dc_prev(H), dfeat(I), dcol(N_);
    fc_.backward(h, dy, dh);
    const bool want_dx = !dx.empty();
    for (std::size_t t = R_; t-- > 0;) {
      const bool need_feat_grad = want_dx || conv_ch_;
      cell_.backward(steps[t], dh, dc, need_feat_grad ? std::span<double>(dfeat) : std::span<double>(), dh_prev,
                     dc_prev);
      if (conv_ch_) {
        conv_.backward(cols[t], N_, dfeat, want_dx ? std::span<double>(dcol) : std::span<double>());
        if (want_dx)
          for (std::size_t j = 0; j < N_; ++j) dx[j * R_ + t] = dcol[j];
      } else if (want_dx) {
        for (std::size_t j = 0; j < N_; ++j) dx[j * R_ + t] = dfeat[j];
      }
      dh.swap(dh_prev);
      dc.swap(dc_prev);
    }
    return L;
  }

  nn::ParamList parameters() override {
    nn::ParamList ps;
    if (conv_ch_)
      for (auto* p : conv_.parameters()) ps.push_back(p);
    for (auto* p : {&cell_.weight, &cell_.bias, &fc_.weight, &fc_.bias}) ps.push_back(p);
    return ps;
  }
  std::unique_ptr<Network> clone() const override { return std::make_unique<LstmNet>(*this); }

  nn::LstmCell& cell() { return cell_; }
  nn::Conv1d& conv() { return conv_; }
  nn::Dense& fc() { return fc_; }

 private:
  void column(std::span<const double> x, std::size_t t, std::vector<double>& out) const {
    for (std::size_t j = 0; j < N_; ++j) out[j] = x[j * R_ + t];
  }

  std::size_t N_, R_, conv_ch_;
  nn::Conv1d conv_;
  nn::LstmCell cell_;
  nn::Dense fc_;
};

/// Builds and initialises the network for a neural architecture.
inline std::unique_ptr<Network> make_network(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(sub_seed(cfg.seed, "init-" + to_string(cfg.arch)));
  const auto N = cfg.stations, R = cfg.R;
  switch (cfg.arch) {
    case Arch::Bpnn: {
      auto n = std::make_unique<BpnnNet>(N, R, cfg.bpnn_hidden);
      n->init(rng);
      return n;
    }
    case Arch::SepBpnn: {
      auto n = std::make_unique<SepBpnnNet>(N, R, cfg.sep_hidden);
      n->init(rng);
      return n;
    }
    case Arch::Cnn: {
      auto n = std::make_unique<CnnNet>(N, R, cfg.cnn_channels1, cfg.cnn_channels2, cfg.cnn_kernel);
      n->init(rng);
      return n;
    }
    case Arch::Lstm: {
      auto n = std::make_unique<LstmNet>(N, R, cfg.lstm_hidden);
      n->init(rng);
      return n;
    }
    case Arch::CnnLstm: {
      auto n = std::make_unique<LstmNet>(N, R, cfg.lstm_hidden, cfg.cnn_lstm_channels, cfg.cnn_lstm_kernel);
      n->init(rng);
      return n;
    }
    default: throw ConfigError(to_string(cfg.arch) + " is not a neural architecture");
  }
}

}  // namespace mflow
