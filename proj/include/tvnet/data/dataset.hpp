#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tvnet/core/resize.hpp"
#include "tvnet/data/image.hpp"
#include "tvnet/errors.hpp"
#include "tvnet/io/image_io.hpp"

namespace tvnet {

inline constexpr std::array<const char*, 7> kAttributeCodes = {
    "MO", "SO", "OV", "CS", "OC", "OF", "SQ"};

inline bool is_attribute_code(const std::string& s) {
  for (const char* c : kAttributeCodes) {
    if (s == c) return true;
  }
  return false;
}

// One annotated microscopy frame.
struct Sample {
  RgbImage image;
  GrayMap mask;   // binary object mask
  GrayMap edge;   // binary edge map
  std::vector<std::string> attributes;
  bool background = false;
};

struct DatasetRecord {
  std::string name;  // file name, shared across Images/ and GT_* dirs
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::filesystem::path edge_path;  // empty when GT_Edge is absent
  std::vector<std::string> attributes;
  bool background = false;
};

struct DatasetIndex {
  std::string split;
  std::filesystem::path root;
  std::vector<DatasetRecord> records;
};

// On-disk layout knobs; the published TVMI3K layout is not pinned, so the
// directory names are configurable.
struct DatasetLayout {
  std::string images = "Images";
  std::string masks = "GT_Object";
  std::string edges = "GT_Edge";
  std::string attributes = "attributes.csv";
  std::string train_dir = "Train";
  std::string test_dir = "Test";
};

inline std::map<std::string, std::vector<std::string>> read_attributes_csv(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line.rfind("filename", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("malformed attributes row: " + line);
    std::string name = line.substr(0, comma);
    std::string codes = line.substr(comma + 1);
    std::vector<std::string> attrs;
    std::stringstream ss(codes);
    std::string code;
    while (std::getline(ss, code, ';')) {
      if (code.empty()) continue;
      if (!is_attribute_code(code)) {
        throw DataError("unknown attribute code '" + code + "' for " + name);
      }
      attrs.push_back(code);
    }
    out[name] = std::move(attrs);
  }
  return out;
}

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// Builds and validates the index for one split. Every image must have a mask;
// edges are optional (derived later when absent). Images whose mask is all
// zero get the background flag.
inline DatasetIndex load_index(const std::filesystem::path& root, const std::string& split,
                               const DatasetLayout& layout = {}) {
  check(split == "train" || split == "test", "split must be 'train' or 'test'");
  std::filesystem::path split_dir =
      root / (split == "train" ? layout.train_dir : layout.test_dir);
  std::filesystem::path images_dir = split_dir / layout.images;
  if (!std::filesystem::is_directory(images_dir)) {
    throw DataError("missing images directory: " + images_dir.string());
  }
  auto attrs = read_attributes_csv(split_dir / layout.attributes);

  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(images_dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());

  DatasetIndex index;
  index.split = split;
  index.root = root;
  for (const std::string& name : names) {
    DatasetRecord rec;
    rec.name = name;
    rec.image_path = images_dir / name;
    rec.mask_path = split_dir / layout.masks / name;
    if (!std::filesystem::exists(rec.mask_path)) {
      throw DataError("no mask for image " + name + " (expected " + rec.mask_path.string() + ")");
    }
    std::filesystem::path edge = split_dir / layout.edges / name;
    if (std::filesystem::exists(edge)) rec.edge_path = edge;
    if (auto it = attrs.find(name); it != attrs.end()) rec.attributes = it->second;
    GrayMap mask = read_mask(rec.mask_path);
    rec.background = mask.max() == 0.0;
    index.records.push_back(std::move(rec));
  }
  return index;
}

// Inner morphological gradient: mask pixels with a background neighbor within
// the (2*width+1) box. Out-of-image neighbors are ignored, so a constant mask
// has no edge.
inline GrayMap derive_edge(const GrayMap& mask, int width = 1) {
  check(width >= 1, "derive_edge: width must be >= 1");
  GrayMap edge(mask.h, mask.w, 0.0);
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      if (mask.at(y, x) == 0.0) continue;
      bool boundary = false;
      for (int dy = -width; dy <= width && !boundary; ++dy) {
        int yy = y + dy;
        if (yy < 0 || yy >= mask.h) continue;
        for (int dx = -width; dx <= width; ++dx) {
          int xx = x + dx;
          if (xx < 0 || xx >= mask.w) continue;
          if (mask.at(yy, xx) == 0.0) {
            boundary = true;
            break;
          }
        }
      }
      if (boundary) edge.at(y, x) = 1.0;
    }
  }
  return edge;
}

inline Sample load_sample(const DatasetRecord& rec, int derive_width = 1) {
  Sample s;
  s.image = read_rgb(rec.image_path);
  s.mask = read_mask(rec.mask_path);
  check(s.mask.h == s.image.h && s.mask.w == s.image.w,
        "mask size differs from image for " + rec.name);
  if (!rec.edge_path.empty()) {
    s.edge = read_mask(rec.edge_path);
    check(s.edge.h == s.image.h && s.edge.w == s.image.w,
          "edge size differs from image for " + rec.name);
  } else {
    s.edge = derive_edge(s.mask, derive_width);
  }
  s.attributes = rec.attributes;
  s.background = rec.background;
  return s;
}

// --------------------------------------------------------------------------
// Geometric augmentation
// --------------------------------------------------------------------------

inline GrayMap resize_gray(const GrayMap& m, int oh, int ow) {
  if (oh == m.h && ow == m.w) return m;
  GrayMap out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    BilinearTap ty = bilinear_tap(oy, m.h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      BilinearTap tx = bilinear_tap(ox, m.w, ow);
      double top = m.at(ty.i0, tx.i0) * (1.0 - tx.w1) + m.at(ty.i0, tx.i1) * tx.w1;
      double bot = m.at(ty.i1, tx.i0) * (1.0 - tx.w1) + m.at(ty.i1, tx.i1) * tx.w1;
      out.at(oy, ox) = top * (1.0 - ty.w1) + bot * ty.w1;
    }
  }
  return out;
}

inline RgbImage resize_rgb(const RgbImage& img, int oh, int ow) {
  if (oh == img.h && ow == img.w) return img;
  RgbImage out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    BilinearTap ty = bilinear_tap(oy, img.h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      BilinearTap tx = bilinear_tap(ox, img.w, ow);
      for (int c = 0; c < 3; ++c) {
        double top = img.at(c, ty.i0, tx.i0) * (1.0 - tx.w1) + img.at(c, ty.i0, tx.i1) * tx.w1;
        double bot = img.at(c, ty.i1, tx.i0) * (1.0 - tx.w1) + img.at(c, ty.i1, tx.i1) * tx.w1;
        out.at(c, oy, ox) = top * (1.0 - ty.w1) + bot * ty.w1;
      }
    }
  }
  return out;
}

inline GrayMap binarize(const GrayMap& m, double thr = 0.5) {
  GrayMap out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] > thr ? 1.0 : 0.0;
  return out;
}

struct AugmentConfig {
  int target_h = 352;
  int target_w = 352;
  bool hflip = false;
  bool vflip = false;
};

inline GrayMap flip_gray(const GrayMap& m, bool hflip, bool vflip) {
  GrayMap out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      out.at(y, x) = m.at(vflip ? m.h - 1 - y : y, hflip ? m.w - 1 - x : x);
  return out;
}

inline RgbImage flip_rgb(const RgbImage& img, bool hflip, bool vflip) {
  RgbImage out(img.h, img.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        out.at(c, y, x) = img.at(c, vflip ? img.h - 1 - y : y, hflip ? img.w - 1 - x : x);
  return out;
}

// Resize to the target size, binarize mask/edge at 0.5, then apply the same
// flips to image, mask and edge.
inline Sample augment(const Sample& s, const AugmentConfig& cfg) {
  Sample out;
  out.image = flip_rgb(resize_rgb(s.image, cfg.target_h, cfg.target_w), cfg.hflip, cfg.vflip);
  out.mask = flip_gray(binarize(resize_gray(s.mask, cfg.target_h, cfg.target_w)), cfg.hflip, cfg.vflip);
  out.edge = flip_gray(binarize(resize_gray(s.edge, cfg.target_h, cfg.target_w)), cfg.hflip, cfg.vflip);
  out.attributes = s.attributes;
  out.background = s.background;
  return out;
}

}  // namespace tvnet
