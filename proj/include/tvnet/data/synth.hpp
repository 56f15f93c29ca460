#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "tvnet/core/rng.hpp"
#include "tvnet/data/dataset.hpp"
#include "tvnet/errors.hpp"

namespace tvnet {

// Synthetic phase-contrast-like microscopy frames: dark textured background,
// bright elliptical bodies (optionally with flagella tails, defocus blur,
// border clipping) and leukocyte-like distractor blobs that stay out of the
// masks. Fully determined by the seed.
struct SynthConfig {
  int n_images = 32;
  int height = 352;
  int width = 352;
  int cases = 5;               // pseudo sample videos; split is chronological per case
  double train_fraction = 0.6;
  int min_objects = 1;
  int max_objects = 17;
  double mean_objects = 3.0;
  double area_ratio_min = 0.0003;  // mirrors the real corpus (0.029%..1.179%)
  double area_ratio_max = 0.012;
  double background_fraction = 0.2;
  double flagella_prob = 0.35;  // CS
  double blur_prob = 0.25;      // OF
  double border_prob = 0.15;    // OV placement
  int max_distractors = 4;
  int edge_width = 1;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_images < 1) throw ConfigError("synth: n_images must be >= 1");
    if (height < 16 || width < 16) throw ConfigError("synth: canvas too small");
    if (cases < 1) throw ConfigError("synth: cases must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ConfigError("synth: train_fraction must be in (0,1)");
    }
    if (min_objects < 1 || max_objects < min_objects) {
      throw ConfigError("synth: bad object count range");
    }
    if (!(area_ratio_min > 0.0 && area_ratio_max >= area_ratio_min && area_ratio_max <= 0.5)) {
      throw ConfigError("synth: bad area ratio range");
    }
    if (area_ratio_max * height * width < 4.0) {
      throw ConfigError("synth: objects would collapse below 4 px on this canvas");
    }
    if (max_objects * area_ratio_max > 0.6) {
      throw ConfigError("synth: unsatisfiable config, object count x size exceeds canvas");
    }
    if (edge_width < 1) throw ConfigError("synth: edge_width must be >= 1");
  }
};

struct SynthBodyLedger {
  std::int64_t area_px = 0;
  std::vector<std::string> attrs;
};

struct SynthImageLedger {
  std::string name;
  int case_id = 0;
  std::string split;  // "train" | "test"
  bool background = false;
  int n_bodies = 0;
  std::vector<SynthBodyLedger> bodies;
  std::vector<std::int64_t> component_areas;  // 8-connectivity merged components
  std::vector<std::string> attributes;        // image-level union
};

struct SynthLedger {
  SynthConfig config;
  std::vector<SynthImageLedger> images;
};

namespace synth_detail {

struct Ellipse {
  double cx, cy, a, b, theta, intensity;
  bool blur = false;
  double blur_sigma = 0.0;
  int flagella = 0;
};

struct Sprite {
  bool is_body = false;
  int body_id = -1;  // index into the body list when is_body
  Ellipse e;
};

inline void gaussian_blur_inplace(std::vector<double>& buf, int h, int w, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  std::vector<double> tmp(buf.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int xx = std::clamp(x + i, 0, w - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * buf[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int yy = std::clamp(y + i, 0, h - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      buf[static_cast<std::size_t>(y) * w + x] = acc;
    }
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

}  // namespace synth_detail

inline SynthLedger synth_generate(const SynthConfig& cfg,
                                  const std::filesystem::path& out_root) {
  namespace fs = std::filesystem;
  using synth_detail::Ellipse;
  using synth_detail::Sprite;
  cfg.validate();
  Rng rng(cfg.seed);

  const int H = cfg.height, W = cfg.width;
  const double canvas_area = double(H) * W;

  // chronological split bookkeeping: image i belongs to case i % cases and
  // the earliest fraction of each case goes to the training split
  std::vector<int> case_total(static_cast<std::size_t>(cfg.cases), 0);
  for (int i = 0; i < cfg.n_images; ++i) case_total[static_cast<std::size_t>(i % cfg.cases)]++;

  for (const char* split : {"Train", "Test"}) {
    fs::create_directories(out_root / split / "Images");
    fs::create_directories(out_root / split / "GT_Object");
    fs::create_directories(out_root / split / "GT_Edge");
  }
  std::ofstream attr_train(out_root / "Train" / "attributes.csv");
  std::ofstream attr_test(out_root / "Test" / "attributes.csv");
  attr_train << "filename,attributes\n";
  attr_test << "filename,attributes\n";

  SynthLedger ledger;
  ledger.config = cfg;

  std::vector<double> alpha(static_cast<std::size_t>(H) * W);
  std::vector<double> premul(static_cast<std::size_t>(H) * W);

  for (int idx = 0; idx < cfg.n_images; ++idx) {
    const int case_id = idx % cfg.cases;
    const int seq = idx / cfg.cases;
    const int train_count = static_cast<int>(
        std::lround(cfg.train_fraction * case_total[static_cast<std::size_t>(case_id)]));
    const bool is_train = seq < train_count;
    char name_buf[64];
    std::snprintf(name_buf, sizeof(name_buf), "case%02d_t%03d.png", case_id, seq);
    const std::string name = name_buf;

    // background texture
    GrayMap canvas(H, W);
    double base = rng.uniform(0.10, 0.20);
    double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double wave = 0.025 * std::sin(2.0 * M_PI * (fx * x / W + fy * y / H) + phase);
        canvas.at(y, x) = std::clamp(base + wave + rng.normal(0.0, 0.015), 0.0, 1.0);
      }

    const bool background_image = rng.bernoulli(cfg.background_fraction);
    int n_bodies = 0;
    if (!background_image) {
      n_bodies = std::clamp(1 + rng.poisson(std::max(0.0, cfg.mean_objects - 1.0)),
                            cfg.min_objects, cfg.max_objects);
    }

    std::vector<Ellipse> bodies;
    for (int bi = 0; bi < n_bodies; ++bi) {
      Ellipse e;
      double ratio = std::exp(rng.uniform(std::log(cfg.area_ratio_min), std::log(cfg.area_ratio_max)));
      double area = ratio * canvas_area;
      double ecc = rng.uniform(1.2, 3.2);
      e.b = std::max(0.9, std::sqrt(area / (M_PI * ecc)));
      e.a = ecc * e.b;
      e.theta = rng.uniform(0.0, M_PI);
      e.intensity = rng.uniform(0.55, 0.85);
      if (rng.bernoulli(cfg.border_prob)) {
        int side = rng.uniform_int(0, 3);
        double along = rng.uniform(0.0, 1.0);
        double off = rng.uniform(-0.4, 0.4) * e.a;
        if (side == 0) { e.cx = off; e.cy = along * (H - 1); }
        else if (side == 1) { e.cx = W - 1 + off; e.cy = along * (H - 1); }
        else if (side == 2) { e.cy = off; e.cx = along * (W - 1); }
        else { e.cy = H - 1 + off; e.cx = along * (W - 1); }
      } else {
        double m = std::min({e.a + 1.0, W / 2.0 - 1.0, H / 2.0 - 1.0});
        e.cx = rng.uniform(m, W - 1 - m);
        e.cy = rng.uniform(m, H - 1 - m);
      }
      e.blur = rng.bernoulli(cfg.blur_prob);
      if (e.blur) e.blur_sigma = rng.uniform(1.0, 2.0);
      if (rng.bernoulli(cfg.flagella_prob)) e.flagella = rng.uniform_int(1, 2);
      bodies.push_back(e);
    }

    int n_distractors = rng.uniform_int(0, cfg.max_distractors);
    std::vector<Ellipse> distractors;
    for (int di = 0; di < n_distractors; ++di) {
      Ellipse e;
      double ratio = std::exp(rng.uniform(std::log(cfg.area_ratio_min), std::log(cfg.area_ratio_max)));
      double area = ratio * canvas_area * rng.uniform(1.0, 3.0);
      double ecc = rng.uniform(1.0, 1.3);
      e.b = std::max(1.0, std::sqrt(area / (M_PI * ecc)));
      e.a = ecc * e.b;
      e.theta = rng.uniform(0.0, M_PI);
      e.intensity = rng.uniform(0.45, 0.75);
      e.cx = rng.uniform(0.0, W - 1.0);
      e.cy = rng.uniform(0.0, H - 1.0);
      distractors.push_back(e);
    }

    // z-order over all sprites
    std::vector<Sprite> sprites;
    for (int bi = 0; bi < n_bodies; ++bi) sprites.push_back({true, bi, bodies[static_cast<std::size_t>(bi)]});
    for (auto& d : distractors) sprites.push_back({false, -1, d});
    rng.shuffle(sprites);

    std::vector<std::vector<std::int64_t>> body_pixels(static_cast<std::size_t>(n_bodies));
    std::vector<char> occluded(static_cast<std::size_t>(n_bodies), 0);
    std::vector<int> claim(static_cast<std::size_t>(H) * W, -1);
    synth_detail::UnionFind uf(std::max(1, n_bodies));
    GrayMap mask(H, W, 0.0);

    for (const Sprite& sp : sprites) {
      const Ellipse& e = sp.e;
      std::fill(alpha.begin(), alpha.end(), 0.0);
      std::fill(premul.begin(), premul.end(), 0.0);
      double ct = std::cos(e.theta), st = std::sin(e.theta);
      double reach = e.a * 1.15 + 2.0;
      int x0 = std::max(0, static_cast<int>(std::floor(e.cx - reach)));
      int x1 = std::min(W - 1, static_cast<int>(std::ceil(e.cx + reach)));
      int y0 = std::max(0, static_cast<int>(std::floor(e.cy - reach)));
      int y1 = std::min(H - 1, static_cast<int>(std::ceil(e.cy + reach)));
      std::vector<std::int64_t> px_list;
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          double dx = x - e.cx, dy = y - e.cy;
          double u = dx * ct + dy * st;
          double v = -dx * st + dy * ct;
          double rho = std::sqrt((u / e.a) * (u / e.a) + (v / e.b) * (v / e.b));
          if (rho > 1.08) continue;
          double a = rho <= 0.85 ? 1.0 : std::clamp((1.08 - rho) / 0.23, 0.0, 1.0);
          double texture = sp.is_body
                               ? 0.92 + 0.08 * std::cos(3.0 * u / e.b) * std::cos(2.5 * v / e.b)
                               : 0.85 + 0.15 * std::cos(2.0 * M_PI * 2.5 * rho);
          std::int64_t at = std::int64_t(y) * W + x;
          alpha[static_cast<std::size_t>(at)] = a;
          premul[static_cast<std::size_t>(at)] = a * e.intensity * texture;
          if (sp.is_body && rho <= 1.0) px_list.push_back(at);
        }
      }
      // flagella: thin bright quadratic Bezier tails, part of the object mask
      for (int f = 0; f < (sp.is_body ? e.flagella : 0); ++f) {
        double psi = rng.uniform(0.0, 2.0 * M_PI);
        double bx = e.cx + (e.a * std::cos(psi)) * ct - (e.b * std::sin(psi)) * st;
        double by = e.cy + (e.a * std::cos(psi)) * st + (e.b * std::sin(psi)) * ct;
        double dir_x = bx - e.cx, dir_y = by - e.cy;
        double dn = std::hypot(dir_x, dir_y);
        dir_x /= dn;
        dir_y /= dn;
        double len = rng.uniform(1.5, 3.0) * std::max(3.0, std::sqrt(e.a * e.b));
        double p1x = bx + dir_x * 0.45 * len - dir_y * len * rng.uniform(-0.25, 0.25);
        double p1y = by + dir_y * 0.45 * len + dir_x * len * rng.uniform(-0.25, 0.25);
        double p2x = bx + dir_x * len - dir_y * len * rng.uniform(-0.4, 0.4);
        double p2y = by + dir_y * len + dir_x * len * rng.uniform(-0.4, 0.4);
        int steps = std::max(8, static_cast<int>(len * 4.0));
        for (int si = 0; si <= steps; ++si) {
          double t = double(si) / steps;
          double omt = 1.0 - t;
          double px = omt * omt * bx + 2.0 * omt * t * p1x + t * t * p2x;
          double py = omt * omt * by + 2.0 * omt * t * p1y + t * t * p2y;
          int xi = static_cast<int>(std::lround(px));
          int yi = static_cast<int>(std::lround(py));
          if (xi < 0 || xi >= W || yi < 0 || yi >= H) continue;
          std::int64_t at = std::int64_t(yi) * W + xi;
          if (alpha[static_cast<std::size_t>(at)] < 1.0) {
            alpha[static_cast<std::size_t>(at)] = 1.0;
            premul[static_cast<std::size_t>(at)] = e.intensity * 0.95;
            px_list.push_back(at);
          }
        }
      }
      std::sort(px_list.begin(), px_list.end());
      px_list.erase(std::unique(px_list.begin(), px_list.end()), px_list.end());

      if (e.blur) {
        synth_detail::gaussian_blur_inplace(alpha, H, W, e.blur_sigma);
        synth_detail::gaussian_blur_inplace(premul, H, W, e.blur_sigma);
      }
      // composite "over", and note which earlier bodies this sprite covers
      std::vector<std::int64_t> occl_hits(static_cast<std::size_t>(n_bodies), 0);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          std::int64_t at = std::int64_t(y) * W + x;
          double a = alpha[static_cast<std::size_t>(at)];
          if (a <= 0.0) continue;
          canvas.at(y, x) = std::clamp(
              canvas.at(y, x) * (1.0 - a) + premul[static_cast<std::size_t>(at)], 0.0, 1.0);
          if (a > 0.5) {
            int owner = claim[static_cast<std::size_t>(at)];
            if (owner >= 0 && (!sp.is_body || owner != sp.body_id)) {
              occl_hits[static_cast<std::size_t>(owner)]++;
            }
          }
        }
      for (int bi = 0; bi < n_bodies; ++bi) {
        auto sz = body_pixels[static_cast<std::size_t>(bi)].size();
        if (sz > 0 && occl_hits[static_cast<std::size_t>(bi)] >= std::max<std::int64_t>(3, std::int64_t(sz) / 20)) {
          occluded[static_cast<std::size_t>(bi)] = 1;
        }
      }
      if (sp.is_body) {
        for (std::int64_t at : px_list) {
          mask.v[static_cast<std::size_t>(at)] = 1.0;
          int& owner = claim[static_cast<std::size_t>(at)];
          if (owner >= 0 && owner != sp.body_id) uf.unite(owner, sp.body_id);
          if (owner < 0) owner = sp.body_id;
        }
        body_pixels[static_cast<std::size_t>(sp.body_id)] = std::move(px_list);
      }
    }

    // merge bodies that touch diagonally/side-by-side (8-connectivity)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        int c0 = claim[static_cast<std::size_t>(std::int64_t(y) * W + x)];
        if (c0 < 0) continue;
        const int offs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
        for (auto& o : offs) {
          int xx = x + o[0], yy = y + o[1];
          if (xx < 0 || xx >= W || yy < 0 || yy >= H) continue;
          int c1 = claim[static_cast<std::size_t>(std::int64_t(yy) * W + xx)];
          if (c1 >= 0 && c1 != c0) uf.unite(c0, c1);
        }
      }

    GrayMap edge = derive_edge(mask, cfg.edge_width);

    // ledger entry
    SynthImageLedger entry;
    entry.name = name;
    entry.case_id = case_id;
    entry.split = is_train ? "train" : "test";
    entry.n_bodies = n_bodies;
    entry.background = n_bodies == 0;
    std::vector<std::int64_t> comp_area(static_cast<std::size_t>(std::max(1, n_bodies)), 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        int c0 = claim[static_cast<std::size_t>(std::int64_t(y) * W + x)];
        if (c0 >= 0) comp_area[static_cast<std::size_t>(uf.find(c0))]++;
      }
    for (int bi = 0; bi < n_bodies; ++bi) {
      if (uf.find(bi) == bi && comp_area[static_cast<std::size_t>(bi)] > 0) {
        entry.component_areas.push_back(comp_area[static_cast<std::size_t>(bi)]);
      }
    }
    std::sort(entry.component_areas.rbegin(), entry.component_areas.rend());

    std::set<std::string> image_attrs;
    std::int64_t total_body_area = 0;
    for (int bi = 0; bi < n_bodies; ++bi) {
      const Ellipse& e = bodies[static_cast<std::size_t>(bi)];
      SynthBodyLedger bl;
      bl.area_px = static_cast<std::int64_t>(body_pixels[static_cast<std::size_t>(bi)].size());
      total_body_area += bl.area_px;
      bool on_border = false;
      for (std::int64_t at : body_pixels[static_cast<std::size_t>(bi)]) {
        int y = static_cast<int>(at / W), x = static_cast<int>(at % W);
        if (y == 0 || y == H - 1 || x == 0 || x == W - 1) {
          on_border = true;
          break;
        }
      }
      if (e.flagella > 0) bl.attrs.push_back("CS");
      if (occluded[static_cast<std::size_t>(bi)]) bl.attrs.push_back("OC");
      if (e.blur) bl.attrs.push_back("OF");
      if (e.a / e.b > 2.5) bl.attrs.push_back("SQ");
      if (on_border) image_attrs.insert("OV");
      for (const auto& a : bl.attrs) image_attrs.insert(a);
      entry.bodies.push_back(std::move(bl));
    }
    if (n_bodies >= 2) image_attrs.insert("MO");
    if (n_bodies >= 1 && total_body_area / canvas_area <= 0.1) image_attrs.insert("SO");
    for (const char* code : kAttributeCodes) {
      if (image_attrs.count(code)) entry.attributes.push_back(code);
    }

    // write everything
    fs::path split_dir = out_root / (is_train ? "Train" : "Test");
    RgbImage rgb(H, W);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) rgb.at(c, y, x) = canvas.at(y, x);
    write_rgb(split_dir / "Images" / name, rgb);
    write_mask(split_dir / "GT_Object" / name, mask);
    write_mask(split_dir / "GT_Edge" / name, edge);
    std::ofstream& attr_out = is_train ? attr_train : attr_test;
    attr_out << name << ",";
    for (std::size_t i = 0; i < entry.attributes.size(); ++i) {
      if (i) attr_out << ";";
      attr_out << entry.attributes[i];
    }
    attr_out << "\n";

    ledger.images.push_back(std::move(entry));
  }

  // machine-readable ground truth for the whole run
  nlohmann::json j;
  j["config"] = {{"n_images", cfg.n_images},
                 {"height", cfg.height},
                 {"width", cfg.width},
                 {"cases", cfg.cases},
                 {"train_fraction", cfg.train_fraction},
                 {"min_objects", cfg.min_objects},
                 {"max_objects", cfg.max_objects},
                 {"mean_objects", cfg.mean_objects},
                 {"area_ratio_min", cfg.area_ratio_min},
                 {"area_ratio_max", cfg.area_ratio_max},
                 {"background_fraction", cfg.background_fraction},
                 {"flagella_prob", cfg.flagella_prob},
                 {"blur_prob", cfg.blur_prob},
                 {"border_prob", cfg.border_prob},
                 {"max_distractors", cfg.max_distractors},
                 {"edge_width", cfg.edge_width},
                 {"seed", cfg.seed}};
  j["images"] = nlohmann::json::array();
  for (const auto& im : ledger.images) {
    nlohmann::json ji = {{"name", im.name},
                         {"case", im.case_id},
                         {"split", im.split},
                         {"background", im.background},
                         {"n_bodies", im.n_bodies},
                         {"component_areas", im.component_areas},
                         {"attributes", im.attributes}};
    ji["bodies"] = nlohmann::json::array();
    for (const auto& b : im.bodies) {
      ji["bodies"].push_back({{"area_px", b.area_px}, {"attrs", b.attrs}});
    }
    j["images"].push_back(std::move(ji));
  }
  std::ofstream ledger_out(out_root / "ledger.json");
  ledger_out << j.dump(2) << "\n";

  return ledger;
}

}  // namespace tvnet
