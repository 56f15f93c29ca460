#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tvnet/autograd/variable.hpp"
#include "tvnet/core/rng.hpp"
#include "tvnet/core/tensor.hpp"

namespace tvnet {

// Ordered registry of trainable parameters and non-trainable buffers
// (batch-norm running stats). Registration order is construction order and
// therefore deterministic; the optimizer and the checkpoint format both rely
// on it.
class ParamStore {
 public:
  struct Param {
    std::string name;
    Var var;
  };
  struct Buffer {
    std::string name;
    Tensor* tensor;
  };

  Var add_param(const std::string& name, Tensor init) {
    Var v = Var::leaf(std::move(init), true);
    params_.push_back({name, v});
    return v;
  }
  void add_buffer(const std::string& name, Tensor* t) {
    buffers_.push_back({name, t});
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Buffer>& buffers() { return buffers_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }

  void zero_grads() {
    for (auto& p : params_) p.var.zero_grad();
  }

  std::int64_t total_count() const {
    std::int64_t t = 0;
    for (const auto& p : params_) t += p.var.value().numel();
    return t;
  }

  // Parameter counts keyed by the first name component ("backbone", "hrf3",
  // "fba4", ...). Used for the architecture summary and the ablation
  // parameter-delta checks.
  std::map<std::string, std::int64_t> counts_by_module() const {
    std::map<std::string, std::int64_t> out;
    for (const auto& p : params_) {
      std::string head = p.name.substr(0, p.name.find('.'));
      out[head] += p.var.value().numel();
    }
    return out;
  }

 private:
  std::vector<Param> params_;
  std::vector<Buffer> buffers_;
};

// He-normal initialization for conv weights (fan-in of the kernel).
inline Tensor he_normal(Shape s, Rng& rng) {
  Tensor t(s);
  double fan_in = double(s.c) * s.h * s.w;
  double stddev = std::sqrt(2.0 / fan_in);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

}  // namespace tvnet
