#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "tvnet/data/image.hpp"

namespace tvnet {
namespace metrics {

inline constexpr int kThresholds = 256;
inline constexpr double kEps = 1e-12;

// Binarization cut k; all swept metrics share this grid. The cuts sit strictly
// inside (0,1), so a binary prediction binarizes to itself at every cut.
inline double threshold_at(int k) { return (k + 0.5) / kThresholds; }

inline void check_pair(const GrayMap& pred, const GrayMap& gt) {
  check(pred.same_size(gt), "metrics: prediction and ground truth sizes differ");
  check(pred.numel() > 0, "metrics: empty maps");
  for (double p : pred.v) check(p >= 0.0 && p <= 1.0, "metrics: prediction outside [0,1]");
  for (double g : gt.v) check(g == 0.0 || g == 1.0, "metrics: ground truth must be binary");
}

inline bool gt_empty(const GrayMap& gt) {
  for (double g : gt.v) {
    if (g != 0.0) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// Confusion counts across all 256 cuts, O(N + kThresholds).
// --------------------------------------------------------------------------

struct ThresholdCounts {
  std::array<double, kThresholds> tp{}, fp{};
  double npos = 0.0, nneg = 0.0;

  double fn(int k) const { return npos - tp[static_cast<std::size_t>(k)]; }
  double tn(int k) const { return nneg - fp[static_cast<std::size_t>(k)]; }
};

inline ThresholdCounts threshold_counts(const GrayMap& pred, const GrayMap& gt) {
  ThresholdCounts c;
  std::array<double, kThresholds + 1> pos_hist{}, neg_hist{};
  const std::int64_t n = pred.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    double p = pred.v[static_cast<std::size_t>(i)];
    // number of cuts the pixel passes == k_max + 1
    int k = static_cast<int>(std::floor(p * kThresholds - 0.5));
    k = std::clamp(k, -1, kThresholds - 1);
    while (k >= 0 && p < threshold_at(k)) --k;
    while (k + 1 < kThresholds && p >= threshold_at(k + 1)) ++k;
    if (gt.v[static_cast<std::size_t>(i)] != 0.0) {
      c.npos += 1.0;
      pos_hist[static_cast<std::size_t>(k + 1)] += 1.0;
    } else {
      c.nneg += 1.0;
      neg_hist[static_cast<std::size_t>(k + 1)] += 1.0;
    }
  }
  // tp[k] = number of positives passing cut k = sum of hist above k
  double pos_acc = 0.0, neg_acc = 0.0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    pos_acc += pos_hist[static_cast<std::size_t>(k + 1)];
    neg_acc += neg_hist[static_cast<std::size_t>(k + 1)];
    c.tp[static_cast<std::size_t>(k)] = pos_acc;
    c.fp[static_cast<std::size_t>(k)] = neg_acc;
  }
  return c;
}

// --------------------------------------------------------------------------
// Mean absolute error
// --------------------------------------------------------------------------

inline double mae(const GrayMap& pred, const GrayMap& gt) {
  check_pair(pred, gt);
  double s = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    s += std::fabs(pred.v[static_cast<std::size_t>(i)] - gt.v[static_cast<std::size_t>(i)]);
  }
  return s / pred.numel();
}

// --------------------------------------------------------------------------
// Structure measure (object- plus region-aware similarity)
// --------------------------------------------------------------------------

namespace detail {

inline double s_object_half(const GrayMap& pred, const GrayMap& gt, bool foreground) {
  double sum = 0.0, count = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    bool in = gt.v[static_cast<std::size_t>(i)] != 0.0;
    if (in == foreground) {
      double p = pred.v[static_cast<std::size_t>(i)];
      sum += foreground ? p : 1.0 - p;
      count += 1.0;
    }
  }
  if (count == 0.0) return 0.0;
  double mean = sum / count;
  double var = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    bool in = gt.v[static_cast<std::size_t>(i)] != 0.0;
    if (in == foreground) {
      double p = pred.v[static_cast<std::size_t>(i)];
      double d = (foreground ? p : 1.0 - p) - mean;
      var += d * d;
    }
  }
  double sd = count > 1.0 ? std::sqrt(var / (count - 1.0)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

inline double s_object(const GrayMap& pred, const GrayMap& gt) {
  double mu = gt.mean();
  return mu * s_object_half(pred, gt, true) + (1.0 - mu) * s_object_half(pred, gt, false);
}

// Regional SSIM-style score on one sub-rectangle.
inline double region_ssim(const GrayMap& pred, const GrayMap& gt, int y0, int y1,
                          int x0, int x1) {
  double n = double(y1 - y0) * (x1 - x0);
  if (n <= 0.0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      mx += pred.at(y, x);
      my += gt.at(y, x);
    }
  mx /= n;
  my /= n;
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      double dx = pred.at(y, x) - mx;
      double dy = gt.at(y, x) - my;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  sx /= n - 1.0 + kEps;
  sy /= n - 1.0 + kEps;
  sxy /= n - 1.0 + kEps;
  double alpha = 4.0 * mx * my * sxy;
  double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

inline double s_region(const GrayMap& pred, const GrayMap& gt) {
  double area = 0.0, sum_x = 0.0, sum_y = 0.0;
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x)
      if (gt.at(y, x) != 0.0) {
        area += 1.0;
        sum_x += x + 1.0;  // 1-based centroid, matching the published code
        sum_y += y + 1.0;
      }
  int cx = static_cast<int>(std::round(sum_x / area));
  int cy = static_cast<int>(std::round(sum_y / area));
  cx = std::clamp(cx, 1, gt.w);
  cy = std::clamp(cy, 1, gt.h);
  double total = double(gt.h) * gt.w;
  double w1 = double(cx) * cy / total;
  double w2 = double(gt.w - cx) * cy / total;
  double w3 = double(cx) * (gt.h - cy) / total;
  double w4 = 1.0 - w1 - w2 - w3;
  return w1 * region_ssim(pred, gt, 0, cy, 0, cx) +
         w2 * region_ssim(pred, gt, 0, cy, cx, gt.w) +
         w3 * region_ssim(pred, gt, cy, gt.h, 0, cx) +
         w4 * region_ssim(pred, gt, cy, gt.h, cx, gt.w);
}

}  // namespace detail

inline double s_measure(const GrayMap& pred, const GrayMap& gt, double alpha = 0.5) {
  check_pair(pred, gt);
  double mu = gt.mean();
  if (mu == 0.0) return 1.0 - pred.mean();  // all-background convention
  if (mu == 1.0) return pred.mean();
  double s = alpha * detail::s_object(pred, gt) + (1.0 - alpha) * detail::s_region(pred, gt);
  return std::clamp(s, 0.0, 1.0);
}

// --------------------------------------------------------------------------
// Enhanced alignment measure
// --------------------------------------------------------------------------

inline std::array<double, kThresholds> e_measure_curve(const GrayMap& pred,
                                                       const GrayMap& gt) {
  check_pair(pred, gt);
  ThresholdCounts c = threshold_counts(pred, gt);
  const double n = double(pred.numel());
  std::array<double, kThresholds> curve{};
  for (int k = 0; k < kThresholds; ++k) {
    double tp = c.tp[static_cast<std::size_t>(k)], fp = c.fp[static_cast<std::size_t>(k)];
    double fn = c.fn(k), tn = c.tn(k);
    double mu_fm = (tp + fp) / n;
    if (c.npos == 0.0) {
      curve[static_cast<std::size_t>(k)] = 1.0 - mu_fm;
      continue;
    }
    if (c.nneg == 0.0) {
      curve[static_cast<std::size_t>(k)] = mu_fm;
      continue;
    }
    double mu_gt = c.npos / n;
    auto enhanced = [&](double fm_val, double gt_val) {
      double fc = fm_val - mu_fm;
      double gc = gt_val - mu_gt;
      double align = 2.0 * gc * fc / (gc * gc + fc * fc + kEps);
      double e = (align + 1.0) * (align + 1.0) / 4.0;
      return e;
    };
    curve[static_cast<std::size_t>(k)] =
        (tp * enhanced(1, 1) + fp * enhanced(1, 0) + fn * enhanced(0, 1) +
         tn * enhanced(0, 0)) /
        n;
  }
  return curve;
}

inline double e_measure_max(const GrayMap& pred, const GrayMap& gt) {
  check_pair(pred, gt);
  if (gt_empty(gt)) return pred.max() == 0.0 ? 1.0 : 0.0;  // background convention
  auto curve = e_measure_curve(pred, gt);
  return *std::max_element(curve.begin(), curve.end());
}

// --------------------------------------------------------------------------
// F-measure family
// --------------------------------------------------------------------------

inline double f_from_counts(double tp, double fp, double fn, double beta2) {
  if (tp == 0.0) return 0.0;
  double precision = tp / (tp + fp);
  double recall = tp / (tp + fn);
  return (1.0 + beta2) * precision * recall / (beta2 * precision + recall);
}

inline std::array<double, kThresholds> f_measure_curve(const GrayMap& pred,
                                                       const GrayMap& gt,
                                                       double beta2 = 0.3) {
  check_pair(pred, gt);
  ThresholdCounts c = threshold_counts(pred, gt);
  std::array<double, kThresholds> curve{};
  for (int k = 0; k < kThresholds; ++k) {
    curve[static_cast<std::size_t>(k)] =
        f_from_counts(c.tp[static_cast<std::size_t>(k)], c.fp[static_cast<std::size_t>(k)],
                      c.fn(k), beta2);
  }
  return curve;
}

inline double f_beta_mean(const GrayMap& pred, const GrayMap& gt, double beta2 = 0.3) {
  check_pair(pred, gt);
  if (gt_empty(gt)) return pred.max() == 0.0 ? 1.0 : 0.0;
  auto curve = f_measure_curve(pred, gt, beta2);
  double s = 0.0;
  for (double f : curve) s += f;
  return s / kThresholds;
}

// Single-cut F at the adaptive threshold min(2*mean(pred), 1).
inline double f_beta_adaptive(const GrayMap& pred, const GrayMap& gt, double beta2 = 0.3) {
  check_pair(pred, gt);
  if (gt_empty(gt)) return pred.max() == 0.0 ? 1.0 : 0.0;
  double thr = std::min(2.0 * pred.mean(), 1.0);
  double tp = 0, fp = 0, fn = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    bool f = pred.v[static_cast<std::size_t>(i)] >= thr;
    bool g = gt.v[static_cast<std::size_t>(i)] != 0.0;
    tp += f && g;
    fp += f && !g;
    fn += !f && g;
  }
  return f_from_counts(tp, fp, fn, beta2);
}

// --------------------------------------------------------------------------
// Weighted F-measure (error propagation to the nearest foreground pixel,
// Gaussian-smoothed errors, distance-decayed background penalty)
// --------------------------------------------------------------------------

namespace detail {

// For every pixel: exact nearest foreground pixel under Euclidean distance,
// ties broken toward the smallest row-major index. Scans per-column nearest
// candidates, O(H*W*W).
struct NearestForeground {
  std::vector<double> dist;  // Euclidean
  std::vector<int> index;    // y*w + x of the chosen foreground pixel
};

inline NearestForeground nearest_foreground(const GrayMap& gt) {
  const int h = gt.h, w = gt.w;
  constexpr double kBig = 1e30;
  // nearest foreground row per (y, column), preferring the smaller row on ties
  std::vector<int> col_row(static_cast<std::size_t>(h) * w, -1);
  std::vector<bool> col_any(static_cast<std::size_t>(w), false);
  for (int x = 0; x < w; ++x) {
    std::vector<int> rows;
    for (int y = 0; y < h; ++y)
      if (gt.at(y, x) != 0.0) rows.push_back(y);
    if (rows.empty()) continue;
    col_any[static_cast<std::size_t>(x)] = true;
    std::size_t j = 0;
    for (int y = 0; y < h; ++y) {
      while (j + 1 < rows.size() &&
             std::abs(rows[j + 1] - y) < std::abs(rows[j] - y)) {
        ++j;
      }
      // prefer the earlier row on an exact tie
      int best = rows[j];
      if (j > 0 && std::abs(rows[j - 1] - y) == std::abs(best - y)) best = rows[j - 1];
      col_row[static_cast<std::size_t>(y) * w + x] = best;
    }
  }
  NearestForeground out;
  out.dist.assign(static_cast<std::size_t>(h) * w, 0.0);
  out.index.assign(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best_d2 = kBig;
      int best_idx = -1;
      for (int cx = 0; cx < w; ++cx) {
        if (!col_any[static_cast<std::size_t>(cx)]) continue;
        int ry = col_row[static_cast<std::size_t>(y) * w + cx];
        double d2 = double(y - ry) * (y - ry) + double(x - cx) * (x - cx);
        int idx = ry * w + cx;
        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
          best_d2 = d2;
          best_idx = idx;
        }
      }
      out.dist[static_cast<std::size_t>(y) * w + x] = std::sqrt(best_d2);
      out.index[static_cast<std::size_t>(y) * w + x] = best_idx;
    }
  }
  return out;
}

}  // namespace detail

inline double f_beta_weighted(const GrayMap& pred, const GrayMap& gt, double beta2 = 1.0) {
  check_pair(pred, gt);
  if (gt_empty(gt)) return pred.max() == 0.0 ? 1.0 : 0.0;
  const int h = gt.h, w = gt.w;

  detail::NearestForeground nf = detail::nearest_foreground(gt);

  // absolute error, with background errors replaced by the error at the
  // nearest foreground pixel
  GrayMap err(h, w), err_t(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) err.at(y, x) = std::fabs(pred.at(y, x) - gt.at(y, x));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (gt.at(y, x) != 0.0) {
        err_t.at(y, x) = err.at(y, x);
      } else {
        int idx = nf.index[static_cast<std::size_t>(y) * w + x];
        err_t.at(y, x) = err.v[static_cast<std::size_t>(idx)];
      }
    }

  // 7x7 Gaussian (sigma 5), zero padding
  constexpr int kK = 7, kR = 3;
  double kernel[kK][kK];
  double ksum = 0.0;
  for (int i = 0; i < kK; ++i)
    for (int j = 0; j < kK; ++j) {
      double dy = i - kR, dx = j - kR;
      kernel[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 25.0));
      ksum += kernel[i][j];
    }
  for (int i = 0; i < kK; ++i)
    for (int j = 0; j < kK; ++j) kernel[i][j] /= ksum;

  GrayMap ea(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kK; ++i) {
        int yy = y + i - kR;
        if (yy < 0 || yy >= h) continue;
        for (int j = 0; j < kK; ++j) {
          int xx = x + j - kR;
          if (xx < 0 || xx >= w) continue;
          acc += kernel[i][j] * err_t.at(yy, xx);
        }
      }
      ea.at(y, x) = acc;
    }

  double npos = 0.0, sum_ew_fg = 0.0, sum_ew_bg = 0.0;
  const double decay = std::log(0.5) / 5.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool fg = gt.at(y, x) != 0.0;
      double e = err.at(y, x);
      if (fg && ea.at(y, x) < e) e = ea.at(y, x);
      double b = fg ? 1.0
                    : 2.0 - std::exp(decay * nf.dist[static_cast<std::size_t>(y) * w + x]);
      double ew = e * b;
      if (fg) {
        npos += 1.0;
        sum_ew_fg += ew;
      } else {
        sum_ew_bg += ew;
      }
    }

  double tpw = npos - sum_ew_fg;
  double fpw = sum_ew_bg;
  double recall = 1.0 - sum_ew_fg / npos;
  double precision = tpw / (kEps + tpw + fpw);
  return (1.0 + beta2) * precision * recall / (kEps + beta2 * precision + recall);
}

// --------------------------------------------------------------------------
// Dice / IoU, averaged over the 256 cuts
// --------------------------------------------------------------------------

struct DiceIouCurves {
  std::array<double, kThresholds> dice{}, iou{};
};

inline DiceIouCurves dice_iou_curves(const GrayMap& pred, const GrayMap& gt) {
  check_pair(pred, gt);
  ThresholdCounts c = threshold_counts(pred, gt);
  DiceIouCurves out;
  for (int k = 0; k < kThresholds; ++k) {
    double tp = c.tp[static_cast<std::size_t>(k)], fp = c.fp[static_cast<std::size_t>(k)];
    double fn = c.fn(k);
    if (2.0 * tp + fp + fn == 0.0) {
      // both prediction and ground truth empty at this cut
      out.dice[static_cast<std::size_t>(k)] = 1.0;
      out.iou[static_cast<std::size_t>(k)] = 1.0;
    } else {
      out.dice[static_cast<std::size_t>(k)] = 2.0 * tp / (2.0 * tp + fp + fn);
      out.iou[static_cast<std::size_t>(k)] = tp / (tp + fp + fn);
    }
  }
  return out;
}

inline std::pair<double, double> m_dice_iou(const GrayMap& pred, const GrayMap& gt) {
  DiceIouCurves c = dice_iou_curves(pred, gt);
  double d = 0.0, i = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    d += c.dice[static_cast<std::size_t>(k)];
    i += c.iou[static_cast<std::size_t>(k)];
  }
  return {d / kThresholds, i / kThresholds};
}

inline std::pair<double, double> dice_iou_adaptive(const GrayMap& pred, const GrayMap& gt) {
  check_pair(pred, gt);
  double thr = std::min(2.0 * pred.mean(), 1.0);
  double tp = 0, fp = 0, fn = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    bool f = pred.v[static_cast<std::size_t>(i)] >= thr;
    bool g = gt.v[static_cast<std::size_t>(i)] != 0.0;
    tp += f && g;
    fp += f && !g;
    fn += !f && g;
  }
  if (2.0 * tp + fp + fn == 0.0) return {1.0, 1.0};
  return {2.0 * tp / (2.0 * tp + fp + fn), tp / (tp + fp + fn)};
}

// --------------------------------------------------------------------------
// The seven-metric report (one Table-2-style row)
// --------------------------------------------------------------------------

struct MetricsReport {
  double s_alpha = 0.0;
  double e_phi_max = 0.0;
  double f_beta_w = 0.0;
  double f_beta_mean = 0.0;
  double mae = 0.0;
  double m_dice = 0.0;
  double m_iou = 0.0;
};

struct EvalOptions {
  bool adaptive = false;  // adaptive-threshold F/Dice/IoU instead of 256-cut means
};

inline MetricsReport evaluate_pair(const GrayMap& pred, const GrayMap& gt,
                                   const EvalOptions& opts = {}) {
  MetricsReport r;
  r.s_alpha = s_measure(pred, gt);
  r.e_phi_max = e_measure_max(pred, gt);
  r.f_beta_w = f_beta_weighted(pred, gt);
  r.mae = mae(pred, gt);
  if (gt_empty(gt)) {
    double score = pred.max() == 0.0 ? 1.0 : 0.0;
    r.f_beta_mean = score;
    r.m_dice = score;
    r.m_iou = score;
    return r;
  }
  if (opts.adaptive) {
    r.f_beta_mean = f_beta_adaptive(pred, gt);
    auto [d, i] = dice_iou_adaptive(pred, gt);
    r.m_dice = d;
    r.m_iou = i;
  } else {
    r.f_beta_mean = f_beta_mean(pred, gt);
    auto [d, i] = m_dice_iou(pred, gt);
    r.m_dice = d;
    r.m_iou = i;
  }
  return r;
}

}  // namespace metrics
}  // namespace tvnet
