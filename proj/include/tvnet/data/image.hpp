#pragma once

#include <vector>

#include "tvnet/core/tensor.hpp"

namespace tvnet {

// Single-channel image with doubles in [0,1] (or binary {0,1} for masks).
struct GrayMap {
  int h = 0, w = 0;
  std::vector<double> v;

  GrayMap() = default;
  GrayMap(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::int64_t numel() const { return std::int64_t(h) * w; }
  bool same_size(const GrayMap& o) const { return h == o.h && w == o.w; }

  double mean() const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  double max() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
  }
};

// Planar 3-channel image, values in [0,1].
struct RgbImage {
  int h = 0, w = 0;
  std::vector<double> v;  // 3*h*w, channel-major

  RgbImage() = default;
  RgbImage(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<std::size_t>(3) * h_ * w_, fill) {}

  double& at(int c, int y, int x) {
    return v[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
};

inline Tensor to_tensor(const GrayMap& m) {
  Tensor t(Shape{1, 1, m.h, m.w});
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) t.at(0, 0, y, x) = m.at(y, x);
  return t;
}

inline Tensor to_tensor(const RgbImage& img) {
  Tensor t(Shape{1, 3, img.h, img.w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) t.at(0, c, y, x) = img.at(c, y, x);
  return t;
}

inline GrayMap to_gray_map(const Tensor& t, int n = 0, int c = 0) {
  const Shape& s = t.shape();
  GrayMap m(s.h, s.w);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) m.at(y, x) = t.at(n, c, y, x);
  return m;
}

}  // namespace tvnet
