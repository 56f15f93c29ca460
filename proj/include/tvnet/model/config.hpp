#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvnet/core/tensor.hpp"

namespace tvnet {

// Five-stage backbone description. The stride contract is fixed (level i at
// 1/2^i of the input); only widths and depth vary. "toy" is the built-in CNN
// used for desk-scale runs; pretrained full-scale weights are not bundled, so
// wider/deeper variants of the same family stand in for a full backbone.
struct BackboneSpec {
  std::string kind = "toy";
  std::vector<int> channels = {16, 24, 32, 48, 64};  // c1..c5
  int blocks_per_stage = 2;

  void validate() const {
    check(kind == "toy", "backbone kind '" + kind + "' is not available (use 'toy')");
    check(channels.size() == 5, "backbone needs exactly 5 channel counts");
    for (int c : channels) check(c >= 1, "backbone channels must be >= 1");
    check(blocks_per_stage >= 1, "blocks_per_stage must be >= 1");
  }
};

struct ModelConfig {
  BackboneSpec backbone;
  int c_out = 32;              // uniform width of the refined features
  int cascades = 2;            // FBA refinement repetitions, 1..4
  bool use_hrf = true;
  bool use_fba = true;
  int spatial_kernel = 7;      // spatial attention conv kernel
  int channel_reduction = 16;  // channel attention squeeze ratio

  void validate() const {
    backbone.validate();
    check(c_out >= 1, "c_out must be >= 1");
    check(cascades >= 1 && cascades <= 4, "cascades must be in [1,4]");
    check(spatial_kernel >= 1 && spatial_kernel % 2 == 1, "spatial_kernel must be odd");
    check(channel_reduction >= 1, "channel_reduction must be >= 1");
  }
};

}  // namespace tvnet
