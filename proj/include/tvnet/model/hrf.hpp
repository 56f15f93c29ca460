#pragma once

#include <memory>
#include <string>

#include "tvnet/model/blocks.hpp"

namespace tvnet {

// Boundary head on f2: one 3x3 conv to single-channel edge logits,
// supervised against the (downsampled) ground-truth edge map.
class EdgeHead {
 public:
  EdgeHead(ParamStore& store, Rng& rng, int c2)
      : conv_(store, rng, "edge_head.conv", c2, 1, 3, 1, /*bn=*/false, /*act=*/false) {}

  Var forward(const Var& f2) { return conv_.forward(f2, /*training=*/false); }

  ConvBlock& conv() { return conv_; }

 private:
  ConvBlock conv_;
};

// High-resolution fusion for one pyramid level i in {3,4,5}:
//   fused  = f_i + Conv3x3(Concat(f_i; Conv3x3(resize(f2 -> size of f_i))))
//   gated  = M_s(M_c(fused) * fused) * (M_c(fused) * fused)
//   output = Conv1x1(gated) with c_out channels
// f2 is resized to each level's exact spatial size so the concatenation is
// well-formed at every level.
class HrfModule {
 public:
  HrfModule(ParamStore& store, Rng& rng, const std::string& name, int c2, int ci,
            int c_out, int spatial_kernel, int channel_reduction)
      : pre_(store, rng, name + ".pre", c2, c2, 3, 1, true, false),
        fuse_(store, rng, name + ".fuse", ci + c2, ci, 3, 1, true, false),
        channel_gate_(store, rng, name + ".cgate", ci, channel_reduction),
        spatial_gate_(store, rng, name + ".sgate", spatial_kernel),
        proj_(store, rng, name + ".proj", ci, c_out, 1, 1, true, false) {}

  HrfModule(const HrfModule&) = delete;
  HrfModule& operator=(const HrfModule&) = delete;

  // The residual fusion step alone (the pre-attention feature).
  Var fuse(const Var& f2, const Var& fi, bool training) {
    const Shape& si = fi.shape();
    Var low = resize_bilinear(f2, si.h, si.w);
    low = pre_.forward(low, training);
    Var fused = fuse_.forward(concat_channels({fi, low}), training);
    return add(fi, fused);
  }

  Var forward(const Var& f2, const Var& fi, bool training) {
    Var t = fuse(f2, fi, training);
    t = channel_gate_.forward(t);
    t = spatial_gate_.forward(t);
    return proj_.forward(t, training);
  }

  ConvBlock& fuse_conv() { return fuse_; }
  ChannelGate& channel_gate() { return channel_gate_; }
  SpatialGate& spatial_gate() { return spatial_gate_; }

 private:
  ConvBlock pre_;
  ConvBlock fuse_;
  ChannelGate channel_gate_;
  SpatialGate spatial_gate_;
  ConvBlock proj_;
};

}  // namespace tvnet
