#pragma once

#include <algorithm>
#include <cmath>

#include "tvnet/core/tensor.hpp"

namespace tvnet {

// Source coordinate for bilinear resampling with corner alignment disabled
// (the half-pixel-center convention). Fixed project-wide so resampled values
// are bit-stable across modules.
struct BilinearTap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

inline BilinearTap bilinear_tap(int out_idx, int in_size, int out_size) {
  double scale = static_cast<double>(in_size) / out_size;
  double src = (out_idx + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  int i0 = static_cast<int>(src);
  if (i0 > in_size - 1) i0 = in_size - 1;
  int i1 = std::min(i0 + 1, in_size - 1);
  double w1 = src - i0;
  if (i1 == i0) w1 = 0.0;
  return {i0, i1, w1};
}

inline Tensor resize_bilinear_tensor(const Tensor& x, int oh, int ow) {
  const Shape s = x.shape();
  check(oh > 0 && ow > 0, "resize: output size must be positive");
  if (oh == s.h && ow == s.w) return x;
  Tensor out(Shape{s.n, s.c, oh, ow});
  for (int oy = 0; oy < oh; ++oy) {
    BilinearTap ty = bilinear_tap(oy, s.h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      BilinearTap tx = bilinear_tap(ox, s.w, ow);
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          double v00 = x.at(n, c, ty.i0, tx.i0);
          double v01 = x.at(n, c, ty.i0, tx.i1);
          double v10 = x.at(n, c, ty.i1, tx.i0);
          double v11 = x.at(n, c, ty.i1, tx.i1);
          double top = v00 * (1.0 - tx.w1) + v01 * tx.w1;
          double bot = v10 * (1.0 - tx.w1) + v11 * tx.w1;
          out.at(n, c, oy, ox) = top * (1.0 - ty.w1) + bot * ty.w1;
        }
      }
    }
  }
  return out;
}

}  // namespace tvnet
