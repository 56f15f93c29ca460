#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "tvnet/data/image.hpp"
#include "tvnet/errors.hpp"

namespace tvnet {

inline cv::Mat imread_or_throw(const std::filesystem::path& path, int flags) {
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw DataError("unreadable image: " + path.string());
  return m;
}

// 8-bit grayscale scaled to [0,1].
inline GrayMap read_gray(const std::filesystem::path& path) {
  cv::Mat m = imread_or_throw(path, cv::IMREAD_GRAYSCALE);
  GrayMap out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.at(y, x) = m.at<std::uint8_t>(y, x) / 255.0;
  return out;
}

// Binary mask: pixel >= threshold reads as 1.
inline GrayMap read_mask(const std::filesystem::path& path, int threshold = 128) {
  cv::Mat m = imread_or_throw(path, cv::IMREAD_GRAYSCALE);
  GrayMap out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      out.at(y, x) = m.at<std::uint8_t>(y, x) >= threshold ? 1.0 : 0.0;
  return out;
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  cv::Mat m = imread_or_throw(path, cv::IMREAD_COLOR);  // BGR
  RgbImage out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      cv::Vec3b px = m.at<cv::Vec3b>(y, x);
      out.at(0, y, x) = px[2] / 255.0;
      out.at(1, y, x) = px[1] / 255.0;
      out.at(2, y, x) = px[0] / 255.0;
    }
  return out;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

inline void write_gray(const std::filesystem::path& path, const GrayMap& img) {
  cv::Mat m(img.h, img.w, CV_8UC1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) m.at<std::uint8_t>(y, x) = to_byte(img.at(y, x));
  if (!cv::imwrite(path.string(), m)) throw DataError("cannot write image: " + path.string());
}

inline void write_mask(const std::filesystem::path& path, const GrayMap& mask) {
  cv::Mat m(mask.h, mask.w, CV_8UC1);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      m.at<std::uint8_t>(y, x) = mask.at(y, x) != 0.0 ? 255 : 0;
  if (!cv::imwrite(path.string(), m)) throw DataError("cannot write image: " + path.string());
}

inline void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      m.at<cv::Vec3b>(y, x) =
          cv::Vec3b(to_byte(img.at(2, y, x)), to_byte(img.at(1, y, x)), to_byte(img.at(0, y, x)));
    }
  if (!cv::imwrite(path.string(), m)) throw DataError("cannot write image: " + path.string());
}

}  // namespace tvnet
