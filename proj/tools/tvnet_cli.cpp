// tvnet: train / eval / predict / synth / stats / ablate for the TVNet
// microscopy segmentation pipeline. Exit codes: 0 success, 2 usage or config
// error, 3 data error, 4 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tvnet/cli/config.hpp"
#include "tvnet/data/stats.hpp"
#include "tvnet/data/synth.hpp"
#include "tvnet/metrics/evaluate.hpp"
#include "tvnet/train/ablation.hpp"
#include "tvnet/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace tvnet;

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
};

FlatConfig build_flat(const CommonOpts& co) {
  FlatConfig f;
  if (!co.config_file.empty()) f = FlatConfig::from_file(co.config_file);
  for (const std::string& kv : co.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
    f.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return f;
}

void add_common(CLI::App* cmd, CommonOpts& co) {
  cmd->add_option("--config", co.config_file, "flat key=value config file");
  cmd->add_option("--set", co.sets, "override a config key (key=value, repeatable)");
}

void write_run_config(const fs::path& out_dir, const std::string& subcommand,
                      const FlatConfig& effective) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "run_config.txt");
  out << "# effective configuration for `tvnet " << subcommand << "`\n";
  out << effective.echo();
  std::cout << "[" << subcommand << "] effective config written to "
            << (out_dir / "run_config.txt").string() << "\n";
}

// ---- train ----------------------------------------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string data_root, out_dir, resume;
  int epochs = -1, batch_size = -1, input_size = -1;
  double lr = -1.0;
  long long seed = -1;
};

void run_train(const TrainOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.data_root.empty()) f.set("data_root", o.data_root);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  if (!o.resume.empty()) f.set("resume", o.resume);
  if (o.epochs >= 0) f.set("epochs", std::to_string(o.epochs));
  if (o.batch_size >= 0) f.set("batch_size", std::to_string(o.batch_size));
  if (o.input_size >= 0) f.set("input_size", std::to_string(o.input_size));
  if (o.lr >= 0.0) f.set("lr", fmt_double(o.lr));
  if (o.seed >= 0) f.set("seed", std::to_string(o.seed));

  std::string data_root = f.get_string("data_root", "");
  if (data_root.empty()) throw ConfigError("train: data_root is required");
  std::string out_dir = f.get_string("out_dir", "runs/train");
  std::string resume = f.get_string("resume", "");
  TrainConfig cfg = train_config_from_flat(f);
  f.require_all_consumed();
  cfg.validate();

  FlatConfig echo = train_config_to_flat(cfg);
  echo.set("data_root", data_root);
  echo.set("out_dir", out_dir);
  if (!resume.empty()) echo.set("resume", resume);
  write_run_config(out_dir, "train", echo);

  DatasetIndex index = load_index(data_root, "train");
  std::cout << "[train] " << index.records.size() << " training images\n";
  DatasetIndex eval_index;
  const DatasetIndex* eval_ptr = nullptr;
  if (cfg.eval_every > 0) {
    eval_index = load_index(data_root, "test");
    eval_ptr = &eval_index;
    std::cout << "[train] evaluating on " << eval_index.records.size()
              << " test images every " << cfg.eval_every << " epochs\n";
  }
  TrainOutcome outcome = train_model(cfg, index, out_dir, resume, &std::cout, eval_ptr);
  std::cout << "[train] final checkpoint: " << outcome.final_checkpoint.string() << "\n";
}

// ---- eval -----------------------------------------------------------------

struct EvalOpts {
  CommonOpts common;
  std::string pred_dir, gt_dir, out_dir;
  bool include_background = false;
  bool adaptive = false;
};

void run_eval(const EvalOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.pred_dir.empty()) f.set("pred_dir", o.pred_dir);
  if (!o.gt_dir.empty()) f.set("gt_dir", o.gt_dir);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  if (o.include_background) f.set("exclude_background", "false");
  if (o.adaptive) f.set("adaptive", "true");

  std::string pred_dir = f.get_string("pred_dir", "");
  std::string gt_dir = f.get_string("gt_dir", "");
  if (pred_dir.empty() || gt_dir.empty()) throw ConfigError("eval: pred_dir and gt_dir are required");
  std::string out_dir = f.get_string("out_dir", "");
  metrics::DirectoryEvalOptions opts;
  opts.exclude_background = f.get_bool("exclude_background", true);
  opts.adaptive = f.get_bool("adaptive", false);
  opts.gt_threshold = f.get_int("gt_threshold", 128);
  f.require_all_consumed();

  metrics::DirectoryEval eval = metrics::evaluate_directory(pred_dir, gt_dir, opts);
  std::cout << metrics::kReportHeader << "\n" << metrics::report_csv_row(eval.mean) << "\n";
  std::cout << "[eval] " << eval.images_evaluated << " images evaluated, "
            << eval.background_skipped << " background images skipped\n";
  if (!out_dir.empty()) {
    metrics::write_eval_outputs(eval, out_dir);
    FlatConfig echo;
    echo.set("pred_dir", pred_dir);
    echo.set("gt_dir", gt_dir);
    echo.set("out_dir", out_dir);
    echo.set("exclude_background", opts.exclude_background ? "true" : "false");
    echo.set("adaptive", opts.adaptive ? "true" : "false");
    echo.set("gt_threshold", std::to_string(opts.gt_threshold));
    write_run_config(out_dir, "eval", echo);
  }
}

// ---- predict ----------------------------------------------------------------

struct PredictOpts {
  CommonOpts common;
  std::string checkpoint, image_dir, out_dir;
};

void run_predict(const PredictOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.checkpoint.empty()) f.set("checkpoint", o.checkpoint);
  if (!o.image_dir.empty()) f.set("image_dir", o.image_dir);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  std::string checkpoint = f.get_string("checkpoint", "");
  std::string image_dir = f.get_string("image_dir", "");
  std::string out_dir = f.get_string("out_dir", "");
  if (checkpoint.empty() || image_dir.empty() || out_dir.empty()) {
    throw ConfigError("predict: checkpoint, image_dir and out_dir are required");
  }
  f.require_all_consumed();

  LoadedModel loaded = model_from_checkpoint(checkpoint);
  int n = predict_dir(*loaded.model, loaded.cfg.input_size, image_dir, out_dir);
  std::cout << "[predict] wrote " << n << " probability maps to " << out_dir << "\n";
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
  CommonOpts common;
  std::string out_dir;
  int n = -1, size = -1;
  long long seed = -1;
};

void run_synth(const SynthOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  if (o.n >= 0) f.set("n_images", std::to_string(o.n));
  if (o.size >= 0) f.set("size", std::to_string(o.size));
  if (o.seed >= 0) f.set("seed", std::to_string(o.seed));
  std::string out_dir = f.get_string("out_dir", "");
  if (out_dir.empty()) throw ConfigError("synth: out_dir is required");
  SynthConfig cfg = synth_config_from_flat(f);
  f.require_all_consumed();

  SynthLedger ledger = synth_generate(cfg, out_dir);
  int train_n = 0, test_n = 0, background = 0;
  for (const auto& im : ledger.images) {
    (im.split == "train" ? train_n : test_n)++;
    background += im.background ? 1 : 0;
  }
  FlatConfig echo = synth_config_to_flat(cfg);
  echo.set("out_dir", out_dir);
  write_run_config(out_dir, "synth", echo);
  std::cout << "[synth] " << ledger.images.size() << " images (" << train_n << " train, "
            << test_n << " test, " << background << " background) under " << out_dir << "\n";
}

// ---- stats ------------------------------------------------------------------

struct StatsOpts {
  CommonOpts common;
  std::string data_root, split = "train", out_dir;
};

void run_stats(const StatsOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.data_root.empty()) f.set("data_root", o.data_root);
  f.set("split", o.split);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  std::string data_root = f.get_string("data_root", "");
  if (data_root.empty()) throw ConfigError("stats: data_root is required");
  std::string split = f.get_string("split", "train");
  std::string out_dir = f.get_string("out_dir", "");
  f.require_all_consumed();

  DatasetIndex index = load_index(data_root, split);
  StatsReport report = dataset_stats(index);
  std::cout << stats_to_text(report);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream txt(fs::path(out_dir) / "stats.txt");
    txt << stats_to_text(report);
    std::ofstream js(fs::path(out_dir) / "stats.json");
    js << stats_to_json(report).dump(2) << "\n";
  }
}

// ---- ablate -----------------------------------------------------------------

struct AblateOpts {
  CommonOpts common;
  std::string data_root, out_dir;
  int epochs = -1;
  long long seed = -1;
};

void run_ablate(const AblateOpts& o) {
  FlatConfig f = build_flat(o.common);
  if (!o.data_root.empty()) f.set("data_root", o.data_root);
  if (!o.out_dir.empty()) f.set("out_dir", o.out_dir);
  if (o.epochs >= 0) f.set("epochs", std::to_string(o.epochs));
  if (o.seed >= 0) f.set("seed", std::to_string(o.seed));
  std::string data_root = f.get_string("data_root", "");
  if (data_root.empty()) throw ConfigError("ablate: data_root is required");
  std::string out_dir = f.get_string("out_dir", "runs/ablation");
  TrainConfig cfg = train_config_from_flat(f);
  f.require_all_consumed();
  cfg.validate();

  FlatConfig echo = train_config_to_flat(cfg);
  echo.set("data_root", data_root);
  echo.set("out_dir", out_dir);
  write_run_config(out_dir, "ablate", echo);

  DatasetIndex train_idx = load_index(data_root, "train");
  DatasetIndex test_idx = load_index(data_root, "test");
  AblationOutcome outcome = ablation_suite(cfg, train_idx, test_idx, out_dir, {}, &std::cout);
  std::ifstream md(outcome.report_md);
  std::cout << md.rdbuf();
  std::cout << "[ablate] report: " << outcome.report_csv.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TVNet: tiny-object microscopy segmentation (train/eval/predict/synth/stats/ablate)"};
  app.require_subcommand(1);

  TrainOpts train_o;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset root");
  add_common(train_cmd, train_o.common);
  train_cmd->add_option("--data-root", train_o.data_root, "dataset root (Train/ split inside)");
  train_cmd->add_option("--out-dir", train_o.out_dir, "artifact directory");
  train_cmd->add_option("--resume", train_o.resume, "checkpoint to resume from");
  train_cmd->add_option("--epochs", train_o.epochs, "override epochs");
  train_cmd->add_option("--batch-size", train_o.batch_size, "override batch size");
  train_cmd->add_option("--input-size", train_o.input_size, "override network input size");
  train_cmd->add_option("--lr", train_o.lr, "override learning rate");
  train_cmd->add_option("--seed", train_o.seed, "override seed");

  EvalOpts eval_o;
  CLI::App* eval_cmd = app.add_subcommand("eval", "seven-metric evaluation of saved predictions");
  add_common(eval_cmd, eval_o.common);
  eval_cmd->add_option("--pred-dir", eval_o.pred_dir, "directory of prediction maps");
  eval_cmd->add_option("--gt-dir", eval_o.gt_dir, "directory of ground-truth masks");
  eval_cmd->add_option("--out-dir", eval_o.out_dir, "write metrics.csv/json here");
  eval_cmd->add_flag("--include-background", eval_o.include_background,
                     "also score empty-ground-truth images");
  eval_cmd->add_flag("--adaptive", eval_o.adaptive, "adaptive-threshold F/Dice/IoU variants");

  PredictOpts pred_o;
  CLI::App* pred_cmd = app.add_subcommand("predict", "write probability maps for a directory");
  add_common(pred_cmd, pred_o.common);
  pred_cmd->add_option("--checkpoint", pred_o.checkpoint, "model checkpoint");
  pred_cmd->add_option("--image-dir", pred_o.image_dir, "input images");
  pred_cmd->add_option("--out-dir", pred_o.out_dir, "output directory");

  SynthOpts synth_o;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth_cmd, synth_o.common);
  synth_cmd->add_option("--out-dir", synth_o.out_dir, "dataset root to create");
  synth_cmd->add_option("--n", synth_o.n, "number of images");
  synth_cmd->add_option("--size", synth_o.size, "canvas size (square)");
  synth_cmd->add_option("--seed", synth_o.seed, "generator seed");

  StatsOpts stats_o;
  CLI::App* stats_cmd = app.add_subcommand("stats", "dataset statistics for one split");
  add_common(stats_cmd, stats_o.common);
  stats_cmd->add_option("--data-root", stats_o.data_root, "dataset root");
  stats_cmd->add_option("--split", stats_o.split, "train or test");
  stats_cmd->add_option("--out-dir", stats_o.out_dir, "write stats.txt/json here");

  AblateOpts ablate_o;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the 4-row HRF/FBA ablation grid");
  add_common(ablate_cmd, ablate_o.common);
  ablate_cmd->add_option("--data-root", ablate_o.data_root, "dataset root");
  ablate_cmd->add_option("--out-dir", ablate_o.out_dir, "artifact directory");
  ablate_cmd->add_option("--epochs", ablate_o.epochs, "override epochs per row");
  ablate_cmd->add_option("--seed", ablate_o.seed, "shared seed for all rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help() << "\n";
    return 2;
  }

  try {
    if (train_cmd->parsed()) run_train(train_o);
    if (eval_cmd->parsed()) run_eval(eval_o);
    if (pred_cmd->parsed()) run_predict(pred_o);
    if (synth_cmd->parsed()) run_synth(synth_o);
    if (stats_cmd->parsed()) run_stats(stats_o);
    if (ablate_cmd->parsed()) run_ablate(ablate_o);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
