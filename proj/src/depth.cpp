// Copyright 2026 The scaledepth Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scaledepth/depth.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace sd {

DepthMap::DepthMap(Mat values, Mask valid, DepthKind kind)
    : values_(std::move(values)), valid_(std::move(valid)), kind_(kind) {
  if (valid_.rows() != values_.rows() || valid_.cols() != values_.cols())
    throw std::invalid_argument("DepthMap: mask shape differs from values");
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!valid_.data()[i]) continue;
    double v = values_.data()[i];
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("DepthMap: non-positive valid depth");
    if (kind_ == DepthKind::Relative && !(v < 1.0))
      throw std::invalid_argument("DepthMap: relative depth outside (0, 1)");
  }
}

DepthMap DepthMap::dense(Mat values, DepthKind kind) {
  Mask m = Mask::Ones(values.rows(), values.cols());
  return DepthMap(std::move(values), std::move(m), kind);
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < valid_.size(); ++i) n += valid_.data()[i] != 0;
  return n;
}

std::vector<int> DepthMap::valid_indices() const {
  std::vector<int> out;
  out.reserve(valid_count());
  for (Eigen::Index i = 0; i < valid_.size(); ++i)
    if (valid_.data()[i]) out.push_back(static_cast<int>(i));
  return out;
}

void ValidityPolicy::validate() const {
  if (!(min_depth > 0.0 && min_depth < max_depth))
    throw std::invalid_argument("ValidityPolicy: need 0 < min_depth < max_depth");
}

namespace {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
};

}  // namespace

DepthMap load_depth_png(const std::filesystem::path& path, double divisor) {
  if (!(divisor > 0.0)) throw std::invalid_argument("load_depth_png: divisor must be positive");
  if (!std::filesystem::exists(path)) throw std::runtime_error("load_depth_png: no such file: " + path.string());
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str()))
    throw std::runtime_error("load_depth_png: " + std::string(png.image.message));
  if (!(png.image.format & PNG_FORMAT_FLAG_LINEAR) || (png.image.format & PNG_FORMAT_FLAG_COLOR) ||
      (png.image.format & PNG_FORMAT_FLAG_ALPHA))
    throw std::runtime_error("load_depth_png: expected 16-bit single-channel image: " + path.string());
  png.image.format = PNG_FORMAT_LINEAR_Y;
  const int h = static_cast<int>(png.image.height), w = static_cast<int>(png.image.width);
  std::vector<png_uint_16> raw(static_cast<std::size_t>(h) * w);
  if (!png_image_finish_read(&png.image, nullptr, raw.data(), 0, nullptr))
    throw std::runtime_error("load_depth_png: " + std::string(png.image.message));
  Mat values = Mat::Zero(h, w);
  Mask valid = Mask::Zero(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == 0) continue;
    values.data()[i] = raw[i] / divisor;
    valid.data()[i] = 1;
  }
  return DepthMap(std::move(values), std::move(valid), DepthKind::Metric);
}

void save_depth_png(const DepthMap& map, const std::filesystem::path& path, double divisor) {
  if (!(divisor > 0.0)) throw std::invalid_argument("save_depth_png: divisor must be positive");
  if (map.kind() != DepthKind::Metric) throw std::invalid_argument("save_depth_png: map must be metric");
  std::vector<png_uint_16> raw(static_cast<std::size_t>(map.height()) * map.width(), 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!map.valid().data()[i]) continue;
    double q = std::round(map.values().data()[i] * divisor);
    if (q > 65535.0) throw std::out_of_range("save_depth_png: depth exceeds 16-bit range");
    // A valid depth must never encode as the missing-data value.
    raw[i] = static_cast<png_uint_16>(std::max(q, 1.0));
  }
  PngImage png;
  png.image.width = static_cast<png_uint_32>(map.width());
  png.image.height = static_cast<png_uint_32>(map.height());
  png.image.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, raw.data(), 0, nullptr))
    throw std::runtime_error("save_depth_png: " + std::string(png.image.message));
}

RgbImage load_rgb_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("load_rgb_png: no such file: " + path.string());
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str()))
    throw std::runtime_error("load_rgb_png: " + std::string(png.image.message));
  png.image.format = PNG_FORMAT_RGB;
  const int h = static_cast<int>(png.image.height), w = static_cast<int>(png.image.width);
  std::vector<png_byte> raw(static_cast<std::size_t>(h) * w * 3);
  if (!png_image_finish_read(&png.image, nullptr, raw.data(), 0, nullptr))
    throw std::runtime_error("load_rgb_png: " + std::string(png.image.message));
  RgbImage img{h, w, Mat(static_cast<Eigen::Index>(h) * w, 3)};
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels.data()[i] = raw[i] / 255.0;
  return img;
}

void save_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  std::vector<png_byte> raw(static_cast<std::size_t>(image.pixels.size()));
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<png_byte>(std::lround(std::clamp(image.pixels.data()[i], 0.0, 1.0) * 255.0));
  PngImage png;
  png.image.width = static_cast<png_uint_32>(image.width);
  png.image.height = static_cast<png_uint_32>(image.height);
  png.image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, raw.data(), 0, nullptr))
    throw std::runtime_error("save_rgb_png: " + std::string(png.image.message));
}

DepthMap apply_validity(const DepthMap& map, const ValidityPolicy& policy) {
  policy.validate();
  Mask valid = map.valid();
  for (Eigen::Index i = 0; i < valid.size(); ++i) {
    double v = map.values().data()[i];
    if (v < policy.min_depth || v > policy.max_depth) valid.data()[i] = 0;
  }
  return DepthMap(map.values(), std::move(valid), map.kind());
}

std::vector<Point3> project_point_cloud(const DepthMap& map, const CameraIntrinsics& k) {
  if (!(k.fx > 0 && k.fy > 0)) throw std::invalid_argument("project_point_cloud: focal lengths must be positive");
  if (k.cx < 0 || k.cx > map.width() || k.cy < 0 || k.cy > map.height())
    throw std::invalid_argument("project_point_cloud: principal point outside image");
  std::vector<Point3> pts;
  pts.reserve(map.valid_count());
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u) {
      if (!map.is_valid(v, u)) continue;
      double d = map.at(v, u);
      pts.push_back({(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d});
    }
  return pts;
}

namespace {

// Fully saturated HSV color with hue in degrees.
void hue_to_rgb(double hue, double* rgb) {
  const double h = hue / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  const int sector = std::min(5, static_cast<int>(h));
  static constexpr int kOrder[6][3] = {{0, 1, 2}, {1, 0, 2}, {2, 0, 1}, {2, 1, 0}, {1, 2, 0}, {0, 2, 1}};
  const double v[3] = {1.0, x, 0.0};
  for (int c = 0; c < 3; ++c) rgb[c] = v[kOrder[sector][c]];
}

}  // namespace

RgbImage colorize_rainbow(const DepthMap& map) {
  RgbImage out{map.height(), map.width(), Mat::Zero(static_cast<Eigen::Index>(map.height()) * map.width(), 3)};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < map.values().size(); ++i)
    if (map.valid().data()[i]) {
      lo = std::min(lo, map.values().data()[i]);
      hi = std::max(hi, map.values().data()[i]);
    }
  const double span = hi > lo ? hi - lo : 1.0;
  for (Eigen::Index i = 0; i < map.values().size(); ++i) {
    if (!map.valid().data()[i]) continue;
    double rgb[3];
    hue_to_rgb(240.0 * (1.0 - (map.values().data()[i] - lo) / span), rgb);
    out.pixels.row(i) << rgb[0], rgb[1], rgb[2];
  }
  return out;
}

RgbImage colorize_diverging(const Mat& values, const Mask& valid) {
  if (values.rows() != valid.rows() || values.cols() != valid.cols())
    throw std::invalid_argument("colorize_diverging: mask shape differs from values");
  const int h = static_cast<int>(values.rows()), w = static_cast<int>(values.cols());
  RgbImage out{h, w, Mat::Zero(static_cast<Eigen::Index>(h) * w, 3)};
  double extent = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (valid.data()[i]) extent = std::max(extent, std::abs(values.data()[i]));
  if (extent == 0) extent = 1;
  const Eigen::RowVector3d blue(0.230, 0.299, 0.754), white(0.865, 0.865, 0.865), red(0.706, 0.016, 0.150);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!valid.data()[i]) continue;
    const double t = std::clamp(values.data()[i] / extent, -1.0, 1.0);
    out.pixels.row(i) = t < 0 ? (white + (blue - white) * -t).eval() : (white + (red - white) * t).eval();
  }
  return out;
}

void write_ply(const std::vector<Point3>& points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_ply: cannot open " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : points) out << static_cast<float>(p.x) << ' ' << static_cast<float>(p.y) << ' '
                                   << static_cast<float>(p.z) << '\n';
  if (!out) throw std::runtime_error("write_ply: write failed for " + path.string());
}

}  // namespace sd
