#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "tvnet/train/trainer.hpp"

namespace tvnet {

// One row of the ablation grid: (a) backbone+NCD baseline, (b) +HRF,
// (c) +FBA, (d) full model. All rows share the base config and seed.
struct AblationRow {
  std::string no;
  bool use_hrf = false;
  bool use_fba = false;
  metrics::MetricsReport report;
  std::map<std::string, std::int64_t> param_counts;
  std::int64_t total_params = 0;
};

struct AblationOutcome {
  std::array<AblationRow, 4> rows;
  std::filesystem::path report_csv;
  std::filesystem::path report_md;
};

inline AblationOutcome ablation_suite(const TrainConfig& base, const DatasetIndex& train_idx,
                                      const DatasetIndex& test_idx,
                                      const std::filesystem::path& out_dir,
                                      const DatasetLayout& layout = {},
                                      std::ostream* console = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::array<std::tuple<const char*, bool, bool>, 4> grid = {
      std::tuple{"a", false, false},
      std::tuple{"b", true, false},
      std::tuple{"c", false, true},
      std::tuple{"d", true, true},
  };
  fs::path gt_dir = test_idx.root / layout.test_dir / layout.masks;

  AblationOutcome out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto [no, hrf, fba] = grid[i];
    AblationRow row;
    row.no = no;
    row.use_hrf = hrf;
    row.use_fba = fba;

    TrainConfig cfg = base;
    cfg.model.use_hrf = hrf;
    cfg.model.use_fba = fba;
    fs::path row_dir = out_dir / (std::string("row_") + no);
    if (console) *console << "[ablate] training row " << no << " (hrf=" << hrf
                          << ", fba=" << fba << ")\n";
    TrainOutcome trained = train_model(cfg, train_idx, row_dir, {}, nullptr);

    LoadedModel loaded = model_from_checkpoint(trained.final_checkpoint);
    row.param_counts = loaded.model->params().counts_by_module();
    row.total_params = loaded.model->params().total_count();
    fs::path pred_dir = row_dir / "pred";
    predict_dir(*loaded.model, cfg.input_size, test_idx.root / layout.test_dir / layout.images,
                pred_dir);
    metrics::DirectoryEval eval = metrics::evaluate_directory(pred_dir, gt_dir);
    row.report = eval.mean;
    out.rows[i] = std::move(row);
  }

  out.report_csv = out_dir / "ablation_report.csv";
  {
    std::ofstream csv(out.report_csv);
    csv << "no,hrf,fba," << metrics::kReportHeader << ",params\n";
    for (const auto& r : out.rows) {
      csv << r.no << "," << (r.use_hrf ? 1 : 0) << "," << (r.use_fba ? 1 : 0) << ","
          << metrics::report_csv_row(r.report) << "," << r.total_params << "\n";
    }
  }
  out.report_md = out_dir / "ablation_report.md";
  {
    std::ofstream md(out.report_md);
    md << "| No. | Backbone | HRF | FBA | S_alpha | E_phi_max | F_beta_w | F_beta_mean "
          "| MAE | mDice | mIoU |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : out.rows) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%.3f | %.3f | %.3f | %.3f | %.3f | %.3f | %.3f",
                    r.report.s_alpha, r.report.e_phi_max, r.report.f_beta_w,
                    r.report.f_beta_mean, r.report.mae, r.report.m_dice, r.report.m_iou);
      md << "| " << r.no << " | x | " << (r.use_hrf ? "x" : " ") << " | "
         << (r.use_fba ? "x" : " ") << " | " << buf << " |\n";
    }
  }
  return out;
}

}  // namespace tvnet
