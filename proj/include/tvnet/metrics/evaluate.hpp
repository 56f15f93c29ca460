#pragma once

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tvnet/data/dataset.hpp"
#include "tvnet/io/image_io.hpp"
#include "tvnet/metrics/metrics.hpp"

namespace tvnet {
namespace metrics {

struct DirectoryEvalOptions {
  bool exclude_background = true;  // skip pairs whose ground truth is empty
  bool adaptive = false;
  int gt_threshold = 128;
};

struct DirectoryEval {
  MetricsReport mean;
  int images_evaluated = 0;
  int background_skipped = 0;
  std::vector<std::pair<std::string, MetricsReport>> per_image;
};

// Mean report over an in-memory list, accumulated in list order.
inline DirectoryEval evaluate_pairs(
    const std::vector<std::pair<std::string, std::pair<GrayMap, GrayMap>>>& pairs,
    const DirectoryEvalOptions& opts = {}) {
  DirectoryEval out;
  for (const auto& [name, pg] : pairs) {
    const auto& [pred, gt] = pg;
    if (opts.exclude_background && gt_empty(gt)) {
      out.background_skipped++;
      continue;
    }
    MetricsReport r = evaluate_pair(pred, gt, EvalOptions{opts.adaptive});
    out.per_image.emplace_back(name, r);
    out.mean.s_alpha += r.s_alpha;
    out.mean.e_phi_max += r.e_phi_max;
    out.mean.f_beta_w += r.f_beta_w;
    out.mean.f_beta_mean += r.f_beta_mean;
    out.mean.mae += r.mae;
    out.mean.m_dice += r.m_dice;
    out.mean.m_iou += r.m_iou;
    out.images_evaluated++;
  }
  if (out.images_evaluated > 0) {
    double inv = 1.0 / out.images_evaluated;
    out.mean.s_alpha *= inv;
    out.mean.e_phi_max *= inv;
    out.mean.f_beta_w *= inv;
    out.mean.f_beta_mean *= inv;
    out.mean.mae *= inv;
    out.mean.m_dice *= inv;
    out.mean.m_iou *= inv;
  }
  return out;
}

// Pairs prediction maps with ground truths by filename (the two directories
// must hold exactly the same names) and averages per-image metrics. Files are
// processed in sorted-name order, so on-disk enumeration order is irrelevant.
inline DirectoryEval evaluate_directory(const std::filesystem::path& pred_dir,
                                        const std::filesystem::path& gt_dir,
                                        const DirectoryEvalOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(pred_dir)) throw DataError("not a directory: " + pred_dir.string());
  if (!fs::is_directory(gt_dir)) throw DataError("not a directory: " + gt_dir.string());
  auto list_names = [](const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && is_image_file(e.path())) {
        names.insert(e.path().filename().string());
      }
    }
    return names;
  };
  std::set<std::string> pred_names = list_names(pred_dir);
  std::set<std::string> gt_names = list_names(gt_dir);
  for (const auto& n : pred_names) {
    if (!gt_names.count(n)) throw DataError("prediction without ground truth: " + n);
  }
  for (const auto& n : gt_names) {
    if (!pred_names.count(n)) throw DataError("ground truth without prediction: " + n);
  }

  std::vector<std::pair<std::string, std::pair<GrayMap, GrayMap>>> pairs;
  for (const auto& name : pred_names) {
    GrayMap pred = read_gray(pred_dir / name);
    GrayMap gt = read_mask(gt_dir / name, opts.gt_threshold);
    if (!pred.same_size(gt)) {
      throw DataError("size mismatch between prediction and ground truth for " + name);
    }
    pairs.emplace_back(name, std::make_pair(std::move(pred), std::move(gt)));
  }
  return evaluate_pairs(pairs, opts);
}

// Table-2 column order.
inline constexpr const char* kReportHeader =
    "S_alpha,E_phi_max,F_beta_w,F_beta_mean,MAE,mDice,mIoU";

inline std::string report_csv_row(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.s_alpha,
                r.e_phi_max, r.f_beta_w, r.f_beta_mean, r.mae, r.m_dice, r.m_iou);
  return buf;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  return {{"S_alpha", r.s_alpha},   {"E_phi_max", r.e_phi_max},
          {"F_beta_w", r.f_beta_w}, {"F_beta_mean", r.f_beta_mean},
          {"MAE", r.mae},           {"mDice", r.m_dice},
          {"mIoU", r.m_iou}};
}

inline void write_eval_outputs(const DirectoryEval& eval, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "metrics.csv");
  csv << "name," << kReportHeader << "\n";
  for (const auto& [name, r] : eval.per_image) csv << name << "," << report_csv_row(r) << "\n";
  csv << "mean," << report_csv_row(eval.mean) << "\n";

  nlohmann::json j;
  j["mean"] = report_to_json(eval.mean);
  j["images_evaluated"] = eval.images_evaluated;
  j["background_skipped"] = eval.background_skipped;
  j["per_image"] = nlohmann::json::array();
  for (const auto& [name, r] : eval.per_image) {
    nlohmann::json ji = report_to_json(r);
    ji["name"] = name;
    j["per_image"].push_back(std::move(ji));
  }
  std::ofstream js(out_dir / "metrics.json");
  js << j.dump(2) << "\n";
}

}  // namespace metrics
}  // namespace tvnet
