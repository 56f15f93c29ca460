#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "tvnet/model/blocks.hpp"
#include "tvnet/model/config.hpp"

namespace tvnet {

// Five feature maps f1..f5; level i lives at 1/2^i of the input resolution.
struct FeaturePyramid {
  std::array<Var, 5> levels;

  Var& f(int i) { return levels[static_cast<std::size_t>(i - 1)]; }
  const Var& f(int i) const { return levels[static_cast<std::size_t>(i - 1)]; }
};

inline void check_input_size(int h, int w) {
  check(h >= 64 && w >= 64, "input must be at least 64x64, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  check(h % 32 == 0 && w % 32 == 0,
        "input size must be divisible by 32 (pad or resize first), got " +
            std::to_string(h) + "x" + std::to_string(w));
}

// Plain five-stage CNN honoring the pyramid stride contract: each stage opens
// with a stride-2 conv, so stage i emits (H/2^i, W/2^i).
class ToyBackbone {
 public:
  ToyBackbone(ParamStore& store, Rng& rng, const BackboneSpec& spec) : spec_(spec) {
    spec_.validate();
    int cin = 3;
    for (int stage = 0; stage < 5; ++stage) {
      int cout = spec_.channels[static_cast<std::size_t>(stage)];
      std::string base = "backbone.s" + std::to_string(stage + 1);
      stages_.emplace_back();
      stages_.back().push_back(std::make_unique<ConvBlock>(
          store, rng, base + ".conv0", cin, cout, 3, 2, true, true));
      for (int b = 1; b < spec_.blocks_per_stage; ++b) {
        stages_.back().push_back(std::make_unique<ConvBlock>(
            store, rng, base + ".conv" + std::to_string(b), cout, cout, 3, 1, true, true));
      }
      cin = cout;
    }
  }

  ToyBackbone(const ToyBackbone&) = delete;
  ToyBackbone& operator=(const ToyBackbone&) = delete;

  FeaturePyramid forward(const Var& image, bool training) {
    const Shape& s = image.shape();
    check(s.c == 3, "backbone expects 3-channel input, got " + std::to_string(s.c));
    check_input_size(s.h, s.w);
    FeaturePyramid pyr;
    Var x = image;
    for (int stage = 0; stage < 5; ++stage) {
      for (auto& block : stages_[static_cast<std::size_t>(stage)]) {
        x = block->forward(x, training);
      }
      pyr.levels[static_cast<std::size_t>(stage)] = x;
    }
    return pyr;
  }

  const BackboneSpec& spec() const { return spec_; }

 private:
  BackboneSpec spec_;
  std::vector<std::vector<std::unique_ptr<ConvBlock>>> stages_;
};

}  // namespace tvnet
