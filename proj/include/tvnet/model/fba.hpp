#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "tvnet/model/blocks.hpp"

namespace tvnet {

// The (strong foreground, weak foreground, background) triple decomposed from
// a single-channel prediction map. Each map is in [0,1] and the three maps
// sum to one at every pixel.
struct RegionMaps {
  Var strong_fg;   // max(2s-1, 0)
  Var weak_fg;     // 1 - |2s-1|
  Var background;  // max(1-2s, 0)

  std::array<Var, 3> as_array() const { return {strong_fg, weak_fg, background}; }
};

// Piecewise-linear split of sigma(P): saturated foreground pixels land in the
// strong map, saturated background in the background map, and the uncertain
// band around s=0.5 in the weak (boundary) map.
inline RegionMaps decompose_regions(const Var& logits) {
  check(logits.shape().c == 1, "decompose_regions: expected single-channel logits");
  Var s = sigmoid(logits);
  Var t = add_scalar(scale(s, 2.0), -1.0);  // 2s-1 in [-1,1]
  RegionMaps r;
  r.strong_fg = relu(t);
  r.weak_fg = add_scalar(scale(absval(t), -1.0), 1.0);
  r.background = relu(scale(t, -1.0));
  return r;
}

// Foreground-background attention at one level. Each cascade extracts
// region-gated features with per-region 3x3 convs, aggregates them residually
//   f_out = sum_k Conv3x3(F_k * f) + f
// and refines the prediction with a 1x1 conv plus the resampled previous map.
class FbaModule {
 public:
  FbaModule(ParamStore& store, Rng& rng, const std::string& name, int c, int cascades)
      : cascades_(cascades) {
    check(cascades >= 1, "fba: cascades must be >= 1");
    for (int k = 0; k < cascades; ++k) {
      std::string base = name + ".c" + std::to_string(k);
      for (int j = 0; j < 3; ++j) {
        region_convs_.push_back(std::make_unique<ConvBlock>(
            store, rng, base + ".region" + std::to_string(j), c, c, 3, 1, true, false));
      }
      pred_convs_.push_back(std::make_unique<ConvBlock>(
          store, rng, base + ".pred", c, 1, 1, 1, false, false));
    }
  }

  FbaModule(const FbaModule&) = delete;
  FbaModule& operator=(const FbaModule&) = delete;

  int cascades() const { return cascades_; }

  // One aggregation step with explicit region maps (already at f's size).
  Var aggregate(const Var& f, const RegionMaps& regions, int cascade, bool training) {
    Var out;
    auto maps = regions.as_array();
    for (int j = 0; j < 3; ++j) {
      Var term = region_convs_[static_cast<std::size_t>(cascade * 3 + j)]->forward(
          mul_spatial_gate(f, maps[static_cast<std::size_t>(j)]), training);
      out = out.defined() ? add(out, term) : term;
    }
    return add(out, f);
  }

  // Returns (refined feature, refined prediction at f's spatial size).
  std::pair<Var, Var> forward(const Var& f, const Var& pred_next, bool training) {
    check(pred_next.shape().c == 1, "fba: prediction must be single-channel");
    const Shape& fs = f.shape();
    Var feat = f;
    Var pred = pred_next;
    for (int k = 0; k < cascades_; ++k) {
      RegionMaps r = decompose_regions(pred);
      r.strong_fg = resize_bilinear(r.strong_fg, fs.h, fs.w);
      r.weak_fg = resize_bilinear(r.weak_fg, fs.h, fs.w);
      r.background = resize_bilinear(r.background, fs.h, fs.w);
      feat = aggregate(feat, r, k, training);
      Var delta = pred_convs_[static_cast<std::size_t>(k)]->forward(feat, training);
      pred = add(delta, resize_bilinear(pred, fs.h, fs.w));
    }
    return {feat, pred};
  }

  ConvBlock& region_conv(int cascade, int j) {
    return *region_convs_[static_cast<std::size_t>(cascade * 3 + j)];
  }

 private:
  int cascades_;
  std::vector<std::unique_ptr<ConvBlock>> region_convs_;
  std::vector<std::unique_ptr<ConvBlock>> pred_convs_;
};

}  // namespace tvnet
