#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "tvnet/errors.hpp"
#include "tvnet/model/params.hpp"

namespace tvnet {

struct OptimizerConfig {
  std::string kind = "sgd";  // "sgd" (momentum) or "adam"
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (kind != "sgd" && kind != "adam") throw ConfigError("optimizer must be sgd or adam");
    if (lr <= 0.0) throw ConfigError("lr must be > 0");
  }
};

inline double global_grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto& p : store.params()) {
    const Tensor& g = p.var.grad_const();
    if (g.empty()) continue;
    for (std::int64_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
  }
  return std::sqrt(sq);
}

// Scales all gradients so their global L2 norm is at most max_norm.
inline void clip_grad_norm(ParamStore& store, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm = global_grad_norm(store);
  if (norm <= max_norm) return;
  double s = max_norm / norm;
  for (auto& p : store.params()) {
    if (!p.var.grad_const().empty()) p.var.grad().scale_(s);
  }
}

// SGD with momentum, or Adam; classic L2 weight decay folded into the
// gradient in both cases.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, const ParamStore& store) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : store.params()) {
      m_.push_back(Tensor::zeros(p.var.shape()));
      if (cfg_.kind == "adam") v_.push_back(Tensor::zeros(p.var.shape()));
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const OptimizerConfig& config() const { return cfg_; }

  void step(ParamStore& store) {
    ++t_;
    auto& params = store.params();
    check(params.size() == m_.size(), "optimizer: parameter list changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& w = params[i].var.value_mut();
      Tensor& g = params[i].var.grad();
      if (cfg_.kind == "sgd") {
        Tensor& vel = m_[i];
        for (std::int64_t k = 0; k < w.numel(); ++k) {
          double grad = g[k] + cfg_.weight_decay * w[k];
          vel[k] = cfg_.momentum * vel[k] + grad;
          w[k] -= cfg_.lr * vel[k];
        }
      } else {
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (std::int64_t k = 0; k < w.numel(); ++k) {
          double grad = g[k] + cfg_.weight_decay * w[k];
          m[k] = cfg_.adam_beta1 * m[k] + (1.0 - cfg_.adam_beta1) * grad;
          v[k] = cfg_.adam_beta2 * v[k] + (1.0 - cfg_.adam_beta2) * grad * grad;
          double mhat = m[k] / bc1;
          double vhat = v[k] / bc2;
          w[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
      }
    }
  }

  // raw little-endian state blob for checkpoints
  void serialize(std::ostream& os) const {
    std::int64_t t = t_;
    os.write(reinterpret_cast<const char*>(&t), sizeof(t));
    auto dump = [&os](const std::vector<Tensor>& ts) {
      std::int64_t n = static_cast<std::int64_t>(ts.size());
      os.write(reinterpret_cast<const char*>(&n), sizeof(n));
      for (const Tensor& t : ts) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
      }
    };
    dump(m_);
    dump(v_);
  }
  void deserialize(std::istream& is) {
    std::int64_t t = 0;
    is.read(reinterpret_cast<char*>(&t), sizeof(t));
    t_ = t;
    auto load = [&is](std::vector<Tensor>& ts) {
      std::int64_t n = 0;
      is.read(reinterpret_cast<char*>(&n), sizeof(n));
      check(n == static_cast<std::int64_t>(ts.size()), "optimizer state count mismatch");
      for (Tensor& t : ts) {
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
      }
    };
    load(m_);
    load(v_);
  }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;  // momentum / first moment
  std::vector<Tensor> v_;  // second moment (adam only)
};

}  // namespace tvnet
