#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tvnet/data/dataset.hpp"

namespace tvnet {

// 8-connectivity connected component areas of a binary map.
inline std::vector<std::int64_t> connected_component_areas(const GrayMap& mask) {
  std::vector<std::int64_t> areas;
  std::vector<char> seen(static_cast<std::size_t>(mask.h) * mask.w, 0);
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      std::size_t at = static_cast<std::size_t>(y) * mask.w + x;
      if (mask.v[at] == 0.0 || seen[at]) continue;
      std::int64_t area = 0;
      std::deque<std::pair<int, int>> queue{{y, x}};
      seen[at] = 1;
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        ++area;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
            std::size_t nat = static_cast<std::size_t>(ny) * mask.w + nx;
            if (mask.v[nat] != 0.0 && !seen[nat]) {
              seen[nat] = 1;
              queue.emplace_back(ny, nx);
            }
          }
      }
      areas.push_back(area);
    }
  }
  std::sort(areas.rbegin(), areas.rend());
  return areas;
}

struct ImageStats {
  std::string name;
  int objects = 0;
  std::vector<std::int64_t> component_areas;  // sorted descending
  std::vector<double> size_ratios;
  bool background = false;
};

struct StatsReport {
  std::string split;
  int images = 0;
  int background_images = 0;
  std::vector<ImageStats> per_image;
  // aggregates over object-bearing images / all components
  double mean_objects = 0.0;
  int max_objects = 0;
  double size_ratio_min = 0.0, size_ratio_max = 0.0, size_ratio_mean = 0.0;
  std::map<std::string, int> attribute_counts;
  std::array<std::array<int, 7>, 7> co_attributes{};  // kAttributeCodes order
};

inline StatsReport dataset_stats(const DatasetIndex& index) {
  StatsReport r;
  r.split = index.split;
  r.images = static_cast<int>(index.records.size());
  std::int64_t object_images = 0, total_objects = 0;
  double ratio_sum = 0.0;
  std::int64_t ratio_count = 0;
  for (const auto& rec : index.records) {
    GrayMap mask = read_mask(rec.mask_path);
    ImageStats is;
    is.name = rec.name;
    is.component_areas = connected_component_areas(mask);
    is.objects = static_cast<int>(is.component_areas.size());
    is.background = is.objects == 0;
    double canvas = double(mask.h) * mask.w;
    for (std::int64_t a : is.component_areas) is.size_ratios.push_back(a / canvas);

    if (is.background) {
      r.background_images++;
    } else {
      object_images++;
      total_objects += is.objects;
      r.max_objects = std::max(r.max_objects, is.objects);
    }
    for (double ratio : is.size_ratios) {
      if (ratio_count == 0) {
        r.size_ratio_min = r.size_ratio_max = ratio;
      } else {
        r.size_ratio_min = std::min(r.size_ratio_min, ratio);
        r.size_ratio_max = std::max(r.size_ratio_max, ratio);
      }
      ratio_sum += ratio;
      ratio_count++;
    }

    for (const auto& a : rec.attributes) r.attribute_counts[a]++;
    for (std::size_t i = 0; i < kAttributeCodes.size(); ++i) {
      bool has_i = std::find(rec.attributes.begin(), rec.attributes.end(),
                             kAttributeCodes[i]) != rec.attributes.end();
      if (!has_i) continue;
      for (std::size_t j = 0; j < kAttributeCodes.size(); ++j) {
        bool has_j = std::find(rec.attributes.begin(), rec.attributes.end(),
                               kAttributeCodes[j]) != rec.attributes.end();
        if (has_j) r.co_attributes[i][j]++;
      }
    }
    r.per_image.push_back(std::move(is));
  }
  r.mean_objects = object_images > 0 ? double(total_objects) / object_images : 0.0;
  r.size_ratio_mean = ratio_count > 0 ? ratio_sum / ratio_count : 0.0;
  return r;
}

inline std::string stats_to_text(const StatsReport& r) {
  std::ostringstream os;
  os << "split: " << r.split << "\n";
  os << "images: " << r.images << " (" << r.background_images << " background)\n";
  os << "objects per image (over object-bearing images): mean " << r.mean_objects
     << ", max " << r.max_objects << "\n";
  os << "object size ratio: min " << r.size_ratio_min << ", mean " << r.size_ratio_mean
     << ", max " << r.size_ratio_max << "\n";
  os << "attributes:";
  for (const char* code : kAttributeCodes) {
    auto it = r.attribute_counts.find(code);
    os << " " << code << "=" << (it == r.attribute_counts.end() ? 0 : it->second);
  }
  os << "\nco-attributes (rows/cols in MO,SO,OV,CS,OC,OF,SQ order):\n";
  for (std::size_t i = 0; i < kAttributeCodes.size(); ++i) {
    for (std::size_t j = 0; j < kAttributeCodes.size(); ++j) {
      os << r.co_attributes[i][j] << (j + 1 < kAttributeCodes.size() ? "\t" : "\n");
    }
  }
  return os.str();
}

inline nlohmann::json stats_to_json(const StatsReport& r) {
  nlohmann::json j;
  j["split"] = r.split;
  j["images"] = r.images;
  j["background_images"] = r.background_images;
  j["mean_objects"] = r.mean_objects;
  j["max_objects"] = r.max_objects;
  j["size_ratio_min"] = r.size_ratio_min;
  j["size_ratio_mean"] = r.size_ratio_mean;
  j["size_ratio_max"] = r.size_ratio_max;
  j["attribute_counts"] = r.attribute_counts;
  j["co_attributes"] = r.co_attributes;
  j["per_image"] = nlohmann::json::array();
  for (const auto& im : r.per_image) {
    j["per_image"].push_back({{"name", im.name},
                              {"objects", im.objects},
                              {"component_areas", im.component_areas},
                              {"background", im.background}});
  }
  return j;
}

}  // namespace tvnet
