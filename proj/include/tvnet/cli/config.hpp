#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tvnet/data/synth.hpp"
#include "tvnet/errors.hpp"
#include "tvnet/losses/losses.hpp"
#include "tvnet/model/config.hpp"
#include "tvnet/train/optim.hpp"

namespace tvnet {

// Flat key=value configuration: one key per line, '#' comments, no nesting.
// Typed getters mark keys as consumed so unknown keys can be rejected, which
// catches typos in experiment files.
class FlatConfig {
 public:
  static FlatConfig from_text(const std::string& text) {
    FlatConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " + line);
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(lineno));
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static FlatConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void merge(const FlatConfig& overrides) {
    for (const auto& [k, v] : overrides.kv_) kv_[k] = v;
  }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }
  int get_int(const std::string& key, int def) const {
    auto it = lookup(key);
    if (!it) return def;
    return static_cast<int>(parse_ll(key, *it));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
    auto it = lookup(key);
    if (!it) return def;
    try {
      return std::stoull(*it);
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not an unsigned integer: " + *it);
    }
  }
  double get_double(const std::string& key, double def) const {
    auto it = lookup(key);
    if (!it) return def;
    try {
      std::size_t pos = 0;
      double v = std::stod(*it, &pos);
      if (pos != it->size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not a number: " + *it);
    }
  }
  bool get_bool(const std::string& key, bool def) const {
    auto it = lookup(key);
    if (!it) return def;
    std::string v = *it;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + *it);
  }
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const {
    auto it = lookup(key);
    if (!it) return def;
    std::vector<int> out;
    std::stringstream ss(*it);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      out.push_back(static_cast<int>(parse_ll(key, trim(tok))));
    }
    return out;
  }
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def) const {
    auto it = lookup(key);
    if (!it) return def;
    std::vector<double> out;
    std::stringstream ss(*it);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stod(trim(tok)));
      } catch (...) {
        throw ConfigError("config key '" + key + "' has a non-numeric element: " + tok);
      }
    }
    return out;
  }

  void require_all_consumed() const {
    for (const auto& [k, v] : kv_) {
      if (!consumed_.count(k)) throw ConfigError("unknown config key: " + k);
    }
  }

  // Sorted key=value lines; parseable by from_text.
  std::string echo() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  const std::string* lookup(const std::string& key) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? nullptr : &it->second;
  }
  static long long parse_ll(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      long long out = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return out;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not an integer: " + v);
    }
  }

  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

// --------------------------------------------------------------------------
// Training configuration <-> flat keys
// --------------------------------------------------------------------------

struct TrainConfig {
  ModelConfig model;
  OptimizerConfig optim;
  int input_size = 352;
  int batch_size = 20;
  int epochs = 50;
  double clip_norm = 0.5;
  int lr_step_epochs = 0;  // 0 = constant learning rate
  double lr_gamma = 0.5;
  std::uint64_t seed = 1;
  bool deterministic = true;
  bool augment_flips = true;
  LossWeights loss;
  int edge_width = 1;   // derive_edge fallback width
  int eval_every = 0;   // epochs between held-out evaluations; 0 disables

  void validate() const {
    model.validate();
    optim.validate();
    if (input_size < 64 || input_size % 32 != 0) {
      throw ConfigError("input_size must be >= 64 and divisible by 32");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (edge_width < 1) throw ConfigError("edge_width must be >= 1");
    if (loss.pool_window < 1 || loss.pool_window % 2 == 0) {
      throw ConfigError("pool_window must be odd and >= 1");
    }
  }
};

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline TrainConfig train_config_from_flat(const FlatConfig& f) {
  TrainConfig c;
  c.model.backbone.kind = f.get_string("backbone", c.model.backbone.kind);
  c.model.backbone.channels = f.get_int_list("backbone_channels", c.model.backbone.channels);
  c.model.backbone.blocks_per_stage = f.get_int("backbone_blocks", c.model.backbone.blocks_per_stage);
  c.model.c_out = f.get_int("c_out", c.model.c_out);
  c.model.cascades = f.get_int("cascades", c.model.cascades);
  c.model.use_hrf = f.get_bool("use_hrf", c.model.use_hrf);
  c.model.use_fba = f.get_bool("use_fba", c.model.use_fba);
  c.model.spatial_kernel = f.get_int("spatial_kernel", c.model.spatial_kernel);
  c.model.channel_reduction = f.get_int("channel_reduction", c.model.channel_reduction);

  c.optim.kind = f.get_string("optimizer", c.optim.kind);
  c.optim.lr = f.get_double("lr", c.optim.kind == "adam" ? 1e-4 : c.optim.lr);
  c.optim.momentum = f.get_double("momentum", c.optim.momentum);
  c.optim.weight_decay = f.get_double("weight_decay", c.optim.weight_decay);
  c.optim.adam_beta1 = f.get_double("adam_beta1", c.optim.adam_beta1);
  c.optim.adam_beta2 = f.get_double("adam_beta2", c.optim.adam_beta2);
  c.optim.adam_eps = f.get_double("adam_eps", c.optim.adam_eps);

  c.input_size = f.get_int("input_size", c.input_size);
  c.batch_size = f.get_int("batch_size", c.batch_size);
  c.epochs = f.get_int("epochs", c.epochs);
  c.clip_norm = f.get_double("clip_norm", c.clip_norm);
  c.lr_step_epochs = f.get_int("lr_step_epochs", c.lr_step_epochs);
  c.lr_gamma = f.get_double("lr_gamma", c.lr_gamma);
  c.seed = f.get_u64("seed", c.seed);
  c.deterministic = f.get_bool("deterministic", c.deterministic);
  c.augment_flips = f.get_bool("augment_flips", c.augment_flips);
  c.edge_width = f.get_int("edge_width", c.edge_width);
  c.eval_every = f.get_int("eval_every", c.eval_every);

  c.loss.lambda_edge = f.get_double("lambda_edge", c.loss.lambda_edge);
  std::vector<double> lw = f.get_double_list(
      "level_weights", {c.loss.level[0], c.loss.level[1], c.loss.level[2], c.loss.level[3]});
  if (lw.size() != 4) throw ConfigError("level_weights needs 4 comma-separated values");
  std::copy(lw.begin(), lw.end(), c.loss.level.begin());
  c.loss.pool_window = f.get_int("pool_window", c.loss.pool_window);
  return c;
}

inline FlatConfig train_config_to_flat(const TrainConfig& c) {
  FlatConfig f;
  f.set("backbone", c.model.backbone.kind);
  {
    std::string s;
    for (std::size_t i = 0; i < c.model.backbone.channels.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(c.model.backbone.channels[i]);
    }
    f.set("backbone_channels", s);
  }
  f.set("backbone_blocks", std::to_string(c.model.backbone.blocks_per_stage));
  f.set("c_out", std::to_string(c.model.c_out));
  f.set("cascades", std::to_string(c.model.cascades));
  f.set("use_hrf", c.model.use_hrf ? "true" : "false");
  f.set("use_fba", c.model.use_fba ? "true" : "false");
  f.set("spatial_kernel", std::to_string(c.model.spatial_kernel));
  f.set("channel_reduction", std::to_string(c.model.channel_reduction));
  f.set("optimizer", c.optim.kind);
  f.set("lr", fmt_double(c.optim.lr));
  f.set("momentum", fmt_double(c.optim.momentum));
  f.set("weight_decay", fmt_double(c.optim.weight_decay));
  f.set("adam_beta1", fmt_double(c.optim.adam_beta1));
  f.set("adam_beta2", fmt_double(c.optim.adam_beta2));
  f.set("adam_eps", fmt_double(c.optim.adam_eps));
  f.set("input_size", std::to_string(c.input_size));
  f.set("batch_size", std::to_string(c.batch_size));
  f.set("epochs", std::to_string(c.epochs));
  f.set("clip_norm", fmt_double(c.clip_norm));
  f.set("lr_step_epochs", std::to_string(c.lr_step_epochs));
  f.set("lr_gamma", fmt_double(c.lr_gamma));
  f.set("seed", std::to_string(c.seed));
  f.set("deterministic", c.deterministic ? "true" : "false");
  f.set("augment_flips", c.augment_flips ? "true" : "false");
  f.set("edge_width", std::to_string(c.edge_width));
  f.set("eval_every", std::to_string(c.eval_every));
  f.set("lambda_edge", fmt_double(c.loss.lambda_edge));
  {
    std::string s;
    for (std::size_t i = 0; i < c.loss.level.size(); ++i) {
      if (i) s += ",";
      s += fmt_double(c.loss.level[i]);
    }
    f.set("level_weights", s);
  }
  f.set("pool_window", std::to_string(c.loss.pool_window));
  return f;
}

// --------------------------------------------------------------------------
// Synthetic generator configuration <-> flat keys
// --------------------------------------------------------------------------

inline SynthConfig synth_config_from_flat(const FlatConfig& f) {
  SynthConfig c;
  c.n_images = f.get_int("n_images", c.n_images);
  int size = f.get_int("size", 0);
  c.height = f.get_int("height", size > 0 ? size : c.height);
  c.width = f.get_int("width", size > 0 ? size : c.width);
  c.cases = f.get_int("cases", c.cases);
  c.train_fraction = f.get_double("train_fraction", c.train_fraction);
  c.min_objects = f.get_int("min_objects", c.min_objects);
  c.max_objects = f.get_int("max_objects", c.max_objects);
  c.mean_objects = f.get_double("mean_objects", c.mean_objects);
  c.area_ratio_min = f.get_double("area_ratio_min", c.area_ratio_min);
  c.area_ratio_max = f.get_double("area_ratio_max", c.area_ratio_max);
  c.background_fraction = f.get_double("background_fraction", c.background_fraction);
  c.flagella_prob = f.get_double("flagella_prob", c.flagella_prob);
  c.blur_prob = f.get_double("blur_prob", c.blur_prob);
  c.border_prob = f.get_double("border_prob", c.border_prob);
  c.max_distractors = f.get_int("max_distractors", c.max_distractors);
  c.edge_width = f.get_int("edge_width", c.edge_width);
  c.seed = f.get_u64("seed", c.seed);
  return c;
}

inline FlatConfig synth_config_to_flat(const SynthConfig& c) {
  FlatConfig f;
  f.set("n_images", std::to_string(c.n_images));
  f.set("height", std::to_string(c.height));
  f.set("width", std::to_string(c.width));
  f.set("cases", std::to_string(c.cases));
  f.set("train_fraction", fmt_double(c.train_fraction));
  f.set("min_objects", std::to_string(c.min_objects));
  f.set("max_objects", std::to_string(c.max_objects));
  f.set("mean_objects", fmt_double(c.mean_objects));
  f.set("area_ratio_min", fmt_double(c.area_ratio_min));
  f.set("area_ratio_max", fmt_double(c.area_ratio_max));
  f.set("background_fraction", fmt_double(c.background_fraction));
  f.set("flagella_prob", fmt_double(c.flagella_prob));
  f.set("blur_prob", fmt_double(c.blur_prob));
  f.set("border_prob", fmt_double(c.border_prob));
  f.set("max_distractors", std::to_string(c.max_distractors));
  f.set("edge_width", std::to_string(c.edge_width));
  f.set("seed", std::to_string(c.seed));
  return f;
}

}  // namespace tvnet
