#pragma once

#include <array>
#include <map>
#include <utility>

#include "tvnet/autograd/ops.hpp"
#include "tvnet/core/resize.hpp"
#include "tvnet/model/tvnet.hpp"

namespace tvnet {

inline Tensor threshold_binary(const Tensor& t, double thr) {
  Tensor out(t.shape());
  for (std::int64_t i = 0; i < t.numel(); ++i) out[i] = t[i] > thr ? 1.0 : 0.0;
  return out;
}

inline void check_binary(const Tensor& t, const char* what) {
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    check(t[i] == 0.0 || t[i] == 1.0, std::string(what) + ": ground truth must be binary");
  }
}

// Pixel-position weights 1 + 5*|meanpool_k(gt) - gt| with a k x k zero-padded
// window (every window divides by k*k). Pixels near mask boundaries, where
// the local mean disagrees with the pixel, get up to 6x weight.
inline Tensor structure_weights(const Tensor& gt, int window = 15) {
  const Shape& s = gt.shape();
  check(s.c == 1, "structure_weights: expected single-channel ground truth");
  check(window >= 1 && window % 2 == 1, "structure_weights: window must be odd");
  const int pad = window / 2;
  const double inv = 1.0 / (double(window) * window);
  Tensor out(s);
  std::vector<double> integral(static_cast<std::size_t>(s.h + 1) * (s.w + 1));
  auto ii = [&](int y, int x) -> double& {
    return integral[static_cast<std::size_t>(y) * (s.w + 1) + x];
  };
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y <= s.h; ++y) ii(y, 0) = 0.0;
    for (int x = 0; x <= s.w; ++x) ii(0, x) = 0.0;
    for (int y = 1; y <= s.h; ++y)
      for (int x = 1; x <= s.w; ++x)
        ii(y, x) = gt.at(n, 0, y - 1, x - 1) + ii(y - 1, x) + ii(y, x - 1) - ii(y - 1, x - 1);
    for (int y = 0; y < s.h; ++y) {
      int y0 = std::max(0, y - pad), y1 = std::min(s.h - 1, y + pad);
      for (int x = 0; x < s.w; ++x) {
        int x0 = std::max(0, x - pad), x1 = std::min(s.w - 1, x + pad);
        double sum = ii(y1 + 1, x1 + 1) - ii(y0, x1 + 1) - ii(y1 + 1, x0) + ii(y0, x0);
        out.at(n, 0, y, x) = 1.0 + 5.0 * std::fabs(sum * inv - gt.at(n, 0, y, x));
      }
    }
  }
  return out;
}

// Plain mean BCE for the edge head.
inline Var edge_bce(const Var& edge_logits, const Tensor& edge_gt) {
  check(edge_logits.shape() == edge_gt.shape(), "edge_bce: size mismatch");
  check_binary(edge_gt, "edge_bce");
  return mean_all(bce_with_logits(edge_logits, edge_gt));
}

// Weighted BCE, normalized per sample by the weight sum, averaged over the
// batch.
inline Var weighted_bce(const Var& logits, const Tensor& gt, const Tensor& weights) {
  check(logits.shape() == gt.shape(), "weighted_bce: size mismatch " +
                                          logits.shape().str() + " vs " + gt.shape().str());
  check_binary(gt, "weighted_bce");
  Var wv = Var::constant(weights);
  Var num = sum_per_sample(mul(bce_with_logits(logits, gt), wv));
  Var den = sum_per_sample(wv);
  return mean_all(divide(num, den));
}
inline Var weighted_bce(const Var& logits, const Tensor& gt, int window = 15) {
  return weighted_bce(logits, gt, structure_weights(gt, window));
}

// Weighted soft IoU loss, 1 - (inter+1)/(union-inter+1), in [0,1].
inline Var weighted_iou(const Var& logits, const Tensor& gt, const Tensor& weights) {
  check(logits.shape() == gt.shape(), "weighted_iou: size mismatch");
  check_binary(gt, "weighted_iou");
  Var p = sigmoid(logits);
  Var y = Var::constant(gt);
  Var wv = Var::constant(weights);
  Var inter = sum_per_sample(mul(mul(p, y), wv));
  Var uni = sum_per_sample(mul(add(p, y), wv));
  Var frac = divide(add_scalar(inter, 1.0), add_scalar(sub(uni, inter), 1.0));
  return mean_all(add_scalar(scale(frac, -1.0), 1.0));
}
inline Var weighted_iou(const Var& logits, const Tensor& gt, int window = 15) {
  return weighted_iou(logits, gt, structure_weights(gt, window));
}

struct LossWeights {
  double lambda_edge = 1.0;
  std::array<double, 4> level = {1.0, 1.0, 1.0, 1.0};  // weights for P6,P5,P4,P3
  int pool_window = 15;
};

struct LossBreakdown {
  double edge_loss = 0.0;
  std::map<int, double> level_loss;  // keyed by level {6,5,4,3}
  double total = 0.0;
};

// Deep supervision objective over every produced prediction. Mask logits are
// upsampled to ground-truth size before the loss; the edge ground truth is
// downsampled (and re-binarized at 0.5) to the edge logits' size.
inline std::pair<Var, LossBreakdown> total_loss(const PredictionSet& preds,
                                                const Tensor& mask_gt,
                                                const Tensor& edge_gt,
                                                const LossWeights& w = {}) {
  const Shape& gs = mask_gt.shape();
  check(gs.c == 1, "total_loss: mask ground truth must be single-channel");
  LossBreakdown bd;
  Var total;

  if (preds.edge_logits.defined()) {
    const Shape& es = preds.edge_logits.shape();
    Tensor egt = threshold_binary(resize_bilinear_tensor(edge_gt, es.h, es.w), 0.5);
    Var el = edge_bce(preds.edge_logits, egt);
    bd.edge_loss = el.item();
    total = scale(el, w.lambda_edge);
  }

  Tensor sw = structure_weights(mask_gt, w.pool_window);
  for (const auto& [level, p] : preds.mask_levels()) {
    Var up = resize_bilinear(p, gs.h, gs.w);
    Var li = add(weighted_bce(up, mask_gt, sw), weighted_iou(up, mask_gt, sw));
    bd.level_loss[level] = li.item();
    Var contrib = scale(li, w.level[static_cast<std::size_t>(6 - level)]);
    total = total.defined() ? add(total, contrib) : contrib;
  }
  check(total.defined(), "total_loss: prediction set is empty");
  bd.total = total.item();
  return {total, bd};
}

}  // namespace tvnet
