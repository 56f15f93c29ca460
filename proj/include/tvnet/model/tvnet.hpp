#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tvnet/model/backbone.hpp"
#include "tvnet/model/fba.hpp"
#include "tvnet/model/hrf.hpp"
#include "tvnet/model/ncd.hpp"

namespace tvnet {

// Everything the forward pass supervises, plus the final probability map.
// p5..p3 are undefined when FBA is ablated away; edge_logits is undefined
// without HRF. final_prob is the sigmoid of the deepest available prediction
// resampled to the input size.
struct PredictionSet {
  Var edge_logits;
  Var p6, p5, p4, p3;
  Var final_prob;

  // (level, logits) pairs for every produced mask prediction, deep to shallow.
  std::vector<std::pair<int, Var>> mask_levels() const {
    std::vector<std::pair<int, Var>> out;
    if (p6.defined()) out.emplace_back(6, p6);
    if (p5.defined()) out.emplace_back(5, p5);
    if (p4.defined()) out.emplace_back(4, p4);
    if (p3.defined()) out.emplace_back(3, p3);
    return out;
  }
};

class TvNet {
 public:
  TvNet(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    const auto& ch = cfg_.backbone.channels;
    backbone_ = std::make_unique<ToyBackbone>(store_, rng, cfg_.backbone);
    if (cfg_.use_hrf) {
      edge_head_ = std::make_unique<EdgeHead>(store_, rng, ch[1]);
      for (int i = 3; i <= 5; ++i) {
        hrf_.push_back(std::make_unique<HrfModule>(
            store_, rng, "hrf" + std::to_string(i), ch[1],
            ch[static_cast<std::size_t>(i - 1)], cfg_.c_out, cfg_.spatial_kernel,
            cfg_.channel_reduction));
      }
    } else {
      for (int i = 3; i <= 5; ++i) {
        proj_.push_back(std::make_unique<ConvBlock>(
            store_, rng, "proj" + std::to_string(i),
            ch[static_cast<std::size_t>(i - 1)], cfg_.c_out, 1, 1, true, false));
      }
    }
    ncd_ = std::make_unique<NcdDecoder>(store_, rng, cfg_.c_out);
    if (cfg_.use_fba) {
      for (int i : {5, 4, 3}) {
        fba_.push_back(std::make_unique<FbaModule>(
            store_, rng, "fba" + std::to_string(i), cfg_.c_out, cfg_.cascades));
      }
    }
  }

  TvNet(const TvNet&) = delete;
  TvNet& operator=(const TvNet&) = delete;

  PredictionSet forward(const Tensor& images, bool training) {
    return forward(Var::constant(images), training);
  }

  PredictionSet forward(const Var& images, bool training) {
    const Shape in_shape = images.shape();
    FeaturePyramid pyr = backbone_->forward(images, training);

    PredictionSet out;
    Var refined[3];
    if (cfg_.use_hrf) {
      out.edge_logits = edge_head_->forward(pyr.f(2));
      for (int i = 3; i <= 5; ++i) {
        refined[i - 3] = hrf_[static_cast<std::size_t>(i - 3)]->forward(
            pyr.f(2), pyr.f(i), training);
      }
    } else {
      for (int i = 3; i <= 5; ++i) {
        refined[i - 3] = proj_[static_cast<std::size_t>(i - 3)]->forward(pyr.f(i), training);
      }
    }

    out.p6 = ncd_->forward(refined[0], refined[1], refined[2], training);

    Var deepest = out.p6;
    if (cfg_.use_fba) {
      auto [f5, p5] = fba_[0]->forward(refined[2], out.p6, training);
      out.p5 = p5;
      auto [f4, p4] = fba_[1]->forward(refined[1], out.p5, training);
      out.p4 = p4;
      auto [f3, p3] = fba_[2]->forward(refined[0], out.p4, training);
      out.p3 = p3;
      deepest = out.p3;
      (void)f5;
      (void)f4;
      (void)f3;
    }
    out.final_prob = sigmoid(resize_bilinear(deepest, in_shape.h, in_shape.w));
    return out;
  }

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  ToyBackbone& backbone() { return *backbone_; }

  // Plain-text per-module parameter counts.
  std::string summary() const {
    std::ostringstream os;
    os << "module\tparams\n";
    for (const auto& [mod, count] : store_.counts_by_module()) {
      os << mod << "\t" << count << "\n";
    }
    os << "total\t" << store_.total_count() << "\n";
    return os.str();
  }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::unique_ptr<ToyBackbone> backbone_;
  std::unique_ptr<EdgeHead> edge_head_;
  std::vector<std::unique_ptr<HrfModule>> hrf_;
  std::vector<std::unique_ptr<ConvBlock>> proj_;
  std::unique_ptr<NcdDecoder> ncd_;
  std::vector<std::unique_ptr<FbaModule>> fba_;
};

}  // namespace tvnet
