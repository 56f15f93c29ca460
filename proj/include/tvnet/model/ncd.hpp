#pragma once

#include <string>

#include "tvnet/model/blocks.hpp"

namespace tvnet {

// Neighbor connection decoder. Deeper features are upsampled, multiplied into
// their shallower neighbors, and the connected maps are concatenated at the
// deepest scale and reduced to the single-channel coarse map P6 (emitted at
// the spatial size of f5', so the level-5 FBA consumes it without resampling).
class NcdDecoder {
 public:
  NcdDecoder(ParamStore& store, Rng& rng, int c)
      : up54_(store, rng, "ncd.up54", c, c, 3, 1, true, false),
        up53_(store, rng, "ncd.up53", c, c, 3, 1, true, false),
        up43_(store, rng, "ncd.up43", c, c, 3, 1, true, false),
        cat_(store, rng, "ncd.cat", 3 * c, c, 3, 1, true, false),
        mix_(store, rng, "ncd.mix", c, c, 3, 1, true, false),
        pred_(store, rng, "ncd.pred", c, 1, 1, 1, false, false) {}

  NcdDecoder(const NcdDecoder&) = delete;
  NcdDecoder& operator=(const NcdDecoder&) = delete;

  Var forward(const Var& f3, const Var& f4, const Var& f5, bool training) {
    check(f3.shape().c == f4.shape().c && f4.shape().c == f5.shape().c,
          "ncd: refined features must share one channel count, got " +
              f3.shape().str() + " / " + f4.shape().str() + " / " + f5.shape().str());
    const Shape& s3 = f3.shape();
    const Shape& s4 = f4.shape();
    const Shape& s5 = f5.shape();

    Var g5 = f5;
    Var g4 = mul(up54_.forward(resize_bilinear(f5, s4.h, s4.w), training), f4);
    Var g3 = mul(mul(up53_.forward(resize_bilinear(f5, s3.h, s3.w), training),
                     up43_.forward(resize_bilinear(f4, s3.h, s3.w), training)),
                 f3);

    Var merged = concat_channels({resize_bilinear(g3, s5.h, s5.w),
                                  resize_bilinear(g4, s5.h, s5.w), g5});
    Var t = mix_.forward(cat_.forward(merged, training), training);
    return pred_.forward(t, training);
  }

 private:
  ConvBlock up54_, up53_, up43_;
  ConvBlock cat_, mix_;
  ConvBlock pred_;
};

}  // namespace tvnet
