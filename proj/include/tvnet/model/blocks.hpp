#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tvnet/autograd/ops.hpp"
#include "tvnet/model/params.hpp"

namespace tvnet {

// conv (+ batch norm) (+ relu). Convs followed by BN carry no bias.
class ConvBlock {
 public:
  ConvBlock(ParamStore& store, Rng& rng, const std::string& name, int cin, int cout,
            int kernel, int stride, bool bn, bool act)
      : stride_(stride), pad_(kernel / 2), bn_(bn), act_(act) {
    w_ = store.add_param(name + ".w", he_normal(Shape{cout, cin, kernel, kernel}, rng));
    if (bn_) {
      gamma_ = store.add_param(name + ".bn_gamma", Tensor::full(Shape{1, cout, 1, 1}, 1.0));
      beta_ = store.add_param(name + ".bn_beta", Tensor::zeros(Shape{1, cout, 1, 1}));
      running_mean_ = Tensor::zeros(Shape{1, cout, 1, 1});
      running_var_ = Tensor::full(Shape{1, cout, 1, 1}, 1.0);
      store.add_buffer(name + ".bn_rmean", &running_mean_);
      store.add_buffer(name + ".bn_rvar", &running_var_);
    } else {
      b_ = store.add_param(name + ".b", Tensor::zeros(Shape{1, cout, 1, 1}));
    }
  }

  ConvBlock(const ConvBlock&) = delete;
  ConvBlock& operator=(const ConvBlock&) = delete;

  Var forward(const Var& x, bool training) {
    Var y = conv2d(x, w_, bn_ ? Var() : b_, stride_, pad_);
    if (bn_) y = batch_norm(y, gamma_, beta_, running_mean_, running_var_, training);
    if (act_) y = relu(y);
    return y;
  }

  Var& weight() { return w_; }
  Var& bias() { return b_; }

  // Used by the residual-identity tests: a zeroed block maps any input to an
  // exact all-zero tensor (BN of a zero batch is beta, which is also zeroed).
  void zero_out() {
    w_.value_mut().fill(0.0);
    if (b_.defined()) b_.value_mut().fill(0.0);
    if (beta_.defined()) beta_.value_mut().fill(0.0);
  }

 private:
  int stride_, pad_;
  bool bn_, act_;
  Var w_, b_, gamma_, beta_;
  Tensor running_mean_, running_var_;
};

// CBAM-style channel gate: shared 1x1 MLP over average- and max-pooled
// channel descriptors, combined and squashed through a sigmoid.
class ChannelGate {
 public:
  ChannelGate(ParamStore& store, Rng& rng, const std::string& name, int c, int reduction) {
    int hidden = std::max(1, c / reduction);
    w1_ = store.add_param(name + ".w1", he_normal(Shape{hidden, c, 1, 1}, rng));
    b1_ = store.add_param(name + ".b1", Tensor::zeros(Shape{1, hidden, 1, 1}));
    w2_ = store.add_param(name + ".w2", he_normal(Shape{c, hidden, 1, 1}, rng));
    b2_ = store.add_param(name + ".b2", Tensor::zeros(Shape{1, c, 1, 1}));
  }

  ChannelGate(const ChannelGate&) = delete;
  ChannelGate& operator=(const ChannelGate&) = delete;

  Var gate(const Var& x) {
    Var a = mlp(global_avg_pool(x));
    Var m = mlp(global_max_pool(x));
    return sigmoid(add(a, m));
  }
  Var forward(const Var& x) { return mul_channel_gate(x, gate(x)); }

 private:
  Var mlp(const Var& d) {
    return conv2d(relu(conv2d(d, w1_, b1_, 1, 0)), w2_, b2_, 1, 0);
  }
  Var w1_, b1_, w2_, b2_;
};

// Spatial gate: channel mean/max maps through a kxk conv, sigmoid-squashed.
class SpatialGate {
 public:
  SpatialGate(ParamStore& store, Rng& rng, const std::string& name, int kernel)
      : pad_(kernel / 2) {
    w_ = store.add_param(name + ".w", he_normal(Shape{1, 2, kernel, kernel}, rng));
    b_ = store.add_param(name + ".b", Tensor::zeros(Shape{1, 1, 1, 1}));
  }

  SpatialGate(const SpatialGate&) = delete;
  SpatialGate& operator=(const SpatialGate&) = delete;

  Var gate(const Var& x) {
    Var d = concat_channels({channel_mean(x), channel_max(x)});
    return sigmoid(conv2d(d, w_, b_, 1, pad_));
  }
  Var forward(const Var& x) { return mul_spatial_gate(x, gate(x)); }

 private:
  int pad_;
  Var w_, b_;
};

}  // namespace tvnet
