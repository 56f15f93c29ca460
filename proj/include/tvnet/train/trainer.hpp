#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "tvnet/cli/config.hpp"
#include "tvnet/data/dataset.hpp"
#include "tvnet/losses/losses.hpp"
#include "tvnet/metrics/evaluate.hpp"
#include "tvnet/model/tvnet.hpp"
#include "tvnet/train/checkpoint.hpp"
#include "tvnet/train/optim.hpp"

namespace tvnet {

struct TrainOutcome {
  std::filesystem::path final_checkpoint;
  std::vector<LossBreakdown> log;
};

namespace train_detail {

inline Tensor stack_images(const std::vector<const Sample*>& batch) {
  int h = batch[0]->image.h, w = batch[0]->image.w;
  Tensor out(Shape{static_cast<int>(batch.size()), 3, h, w});
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at(static_cast<int>(n), c, y, x) = batch[n]->image.at(c, y, x);
  return out;
}

inline Tensor stack_maps(const std::vector<const Sample*>& batch, bool edge) {
  int h = batch[0]->mask.h, w = batch[0]->mask.w;
  Tensor out(Shape{static_cast<int>(batch.size()), 1, h, w});
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const GrayMap& m = edge ? batch[n]->edge : batch[n]->mask;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(static_cast<int>(n), 0, y, x) = m.at(y, x);
  }
  return out;
}

}  // namespace train_detail

// Loads every sample of the index, resized to the network input size.
inline std::vector<Sample> load_training_set(const DatasetIndex& index, int input_size,
                                             int edge_width) {
  std::vector<Sample> out;
  for (const auto& rec : index.records) {
    Sample s = load_sample(rec, edge_width);
    out.push_back(augment(s, AugmentConfig{input_size, input_size, false, false}));
  }
  if (out.empty()) throw DataError("training set is empty under " + index.root.string());
  return out;
}

// Evaluates the frozen model over an index at native ground-truth size.
inline metrics::MetricsReport evaluate_on_index(TvNet& model, int input_size,
                                                const DatasetIndex& index,
                                                bool exclude_background = true) {
  std::vector<std::pair<std::string, std::pair<GrayMap, GrayMap>>> pairs;
  for (const auto& rec : index.records) {
    Sample s = load_sample(rec);
    RgbImage resized = resize_rgb(s.image, input_size, input_size);
    PredictionSet preds = model.forward(to_tensor(resized), /*training=*/false);
    GrayMap prob = to_gray_map(preds.final_prob.value());
    pairs.emplace_back(rec.name,
                       std::make_pair(resize_gray(prob, s.mask.h, s.mask.w), s.mask));
  }
  metrics::DirectoryEvalOptions opts;
  opts.exclude_background = exclude_background;
  return metrics::evaluate_pairs(pairs, opts).mean;
}

// Full optimization loop: seed-shuffled batches, optional flips, deep
// supervision loss, gradient clipping, a checkpoint per epoch, one CSV log
// row per iteration, and (when configured) a held-out evaluation every
// eval_every epochs. Resuming from a checkpoint restores parameters,
// optimizer state, RNG state and counters, so an interrupted deterministic
// run continues bit-exactly.
inline TrainOutcome train_model(const TrainConfig& cfg, const DatasetIndex& index,
                                const std::filesystem::path& out_dir,
                                const std::filesystem::path& resume = {},
                                std::ostream* console = nullptr,
                                const DatasetIndex* eval_index = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(out_dir);

  std::vector<Sample> samples = load_training_set(index, cfg.input_size, cfg.edge_width);
  TvNet model(cfg.model, cfg.seed);
  Optimizer opt(cfg.optim, model.params());
  Rng rng(cfg.seed + 0x9e3779b9ULL);

  const std::string config_text = train_config_to_flat(cfg).echo();
  std::int64_t start_epoch = 0, iteration = 0;
  if (!resume.empty()) {
    CheckpointMeta meta = load_checkpoint(resume, model, &opt);
    start_epoch = meta.epoch;
    iteration = meta.iteration;
    rng.set_state(meta.rng_state);
  }

  {
    std::ofstream summary(out_dir / "model_summary.txt");
    summary << model.summary();
  }
  fs::path log_path = out_dir / "training_log.csv";
  bool fresh_log = start_epoch == 0 || !fs::exists(log_path);
  std::ofstream log(log_path, fresh_log ? std::ios::out : std::ios::app);
  if (fresh_log) log << "iteration,epoch,edge_loss,loss_p6,loss_p5,loss_p4,loss_p3,total,lr\n";

  std::ofstream eval_log;
  if (cfg.eval_every > 0 && eval_index) {
    fs::path eval_path = out_dir / "eval_log.csv";
    bool fresh_eval = start_epoch == 0 || !fs::exists(eval_path);
    eval_log.open(eval_path, fresh_eval ? std::ios::out : std::ios::app);
    if (fresh_eval) eval_log << "epoch,iteration," << metrics::kReportHeader << "\n";
  }

  TrainOutcome outcome;
  fs::path last_path = out_dir / "checkpoint_last.bin";
  const double base_lr = cfg.optim.lr;

  std::vector<std::size_t> order(samples.size());

  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    double lr = base_lr;
    if (cfg.lr_step_epochs > 0) {
      lr = base_lr * std::pow(cfg.lr_gamma, double(epoch / cfg.lr_step_epochs));
    }
    opt.set_lr(lr);
    // the order must be a function of the RNG state alone, so resumed runs
    // see the same batches as the uninterrupted run
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample> flipped;
      std::vector<const Sample*> batch;
      for (std::size_t i = b; i < e; ++i) {
        const Sample& s = samples[order[i]];
        if (cfg.augment_flips) {
          bool fh = rng.bernoulli(0.5), fv = rng.bernoulli(0.5);
          Sample t;
          t.image = flip_rgb(s.image, fh, fv);
          t.mask = flip_gray(s.mask, fh, fv);
          t.edge = flip_gray(s.edge, fh, fv);
          flipped.push_back(std::move(t));
        } else {
          flipped.push_back(s);
        }
      }
      for (const Sample& s : flipped) batch.push_back(&s);

      Tensor images = train_detail::stack_images(batch);
      Tensor masks = train_detail::stack_maps(batch, false);
      Tensor edges = train_detail::stack_maps(batch, true);

      PredictionSet preds = model.forward(images, /*training=*/true);
      auto [loss, breakdown] = total_loss(preds, masks, edges, cfg.loss);
      if (!std::isfinite(breakdown.total)) {
        throw std::runtime_error("training diverged: non-finite loss at iteration " +
                                 std::to_string(iteration));
      }
      model.params().zero_grads();
      loss.backward();
      clip_grad_norm(model.params(), cfg.clip_norm);
      opt.step(model.params());

      ++iteration;
      auto lvl = [&](int level) {
        auto it = breakdown.level_loss.find(level);
        return it == breakdown.level_loss.end() ? 0.0 : it->second;
      };
      char row[512];
      std::snprintf(row, sizeof(row), "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(iteration), static_cast<long long>(epoch),
                    breakdown.edge_loss, lvl(6), lvl(5), lvl(4), lvl(3), breakdown.total, lr);
      log << row;
      outcome.log.push_back(breakdown);
      if (console) {
        *console << "iter " << iteration << " epoch " << epoch << " loss " << breakdown.total
                 << "\n";
      }
    }
    log.flush();
    save_checkpoint(last_path, model, opt, epoch + 1, iteration, rng, config_text);

    if (cfg.eval_every > 0 && eval_index && (epoch + 1) % cfg.eval_every == 0) {
      metrics::MetricsReport r = evaluate_on_index(model, cfg.input_size, *eval_index);
      eval_log << epoch << "," << iteration << "," << metrics::report_csv_row(r) << "\n";
      eval_log.flush();
      if (console) {
        *console << "eval epoch " << epoch << " mDice " << r.m_dice << " MAE " << r.mae
                 << "\n";
      }
    }
  }

  outcome.final_checkpoint = out_dir / "checkpoint_final.bin";
  fs::copy_file(last_path, outcome.final_checkpoint, fs::copy_options::overwrite_existing);
  return outcome;
}

// Rebuilds a model from the config snapshot embedded in a checkpoint.
struct LoadedModel {
  TrainConfig cfg;
  std::unique_ptr<TvNet> model;
};

inline LoadedModel model_from_checkpoint(const std::filesystem::path& path) {
  CheckpointMeta meta = peek_checkpoint(path);
  FlatConfig flat = FlatConfig::from_text(meta.config_text);
  LoadedModel out;
  out.cfg = train_config_from_flat(flat);
  out.model = std::make_unique<TvNet>(out.cfg.model, out.cfg.seed);
  load_checkpoint(path, *out.model, nullptr);
  return out;
}

// Runs the frozen model over every image in a directory and writes the final
// probability maps as 8-bit grayscale files with the input file names.
inline int predict_dir(TvNet& model, int input_size, const std::filesystem::path& image_dir,
                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(image_dir)) throw DataError("not a directory: " + image_dir.string());
  fs::create_directories(out_dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(image_dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    RgbImage img = read_rgb(image_dir / name);
    RgbImage resized = resize_rgb(img, input_size, input_size);
    PredictionSet preds = model.forward(to_tensor(resized), /*training=*/false);
    GrayMap prob = to_gray_map(preds.final_prob.value());
    write_gray(out_dir / name, resize_gray(prob, img.h, img.w));
  }
  return static_cast<int>(names.size());
}

}  // namespace tvnet
