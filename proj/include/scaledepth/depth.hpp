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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scaledepth/autograd.hpp"

namespace sd {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DepthKind { Metric, Relative };

/// Per-pixel depth with a validity mask. Metric maps are in meters; relative
/// maps are dimensionless in (0, 1). Invariants are checked on construction.
class DepthMap {
 public:
  DepthMap(Mat values, Mask valid, DepthKind kind);
  /// All pixels valid.
  static DepthMap dense(Mat values, DepthKind kind);

  int height() const { return static_cast<int>(values_.rows()); }
  int width() const { return static_cast<int>(values_.cols()); }
  const Mat& values() const { return values_; }
  const Mask& valid() const { return valid_; }
  DepthKind kind() const { return kind_; }
  bool is_valid(int y, int x) const { return valid_(y, x) != 0; }
  double at(int y, int x) const { return values_(y, x); }
  std::size_t valid_count() const;
  /// Row-major flat indices of valid pixels.
  std::vector<int> valid_indices() const;

 private:
  Mat values_;
  Mask valid_;
  DepthKind kind_;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

struct ValidityPolicy {
  double min_depth = 1e-3;
  double max_depth = 10.0;
  void validate() const;
};

/// 8-bit style RGB image stored as (H*W) x 3 in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  Mat pixels;
};

struct Point3 {
  double x, y, z;
};

DepthMap load_depth_png(const std::filesystem::path& path, double divisor);
void save_depth_png(const DepthMap& map, const std::filesystem::path& path, double divisor);

RgbImage load_rgb_png(const std::filesystem::path& path);
void save_rgb_png(const RgbImage& image, const std::filesystem::path& path);

/// Clears validity outside [min_depth, max_depth] (both bounds inclusive).
DepthMap apply_validity(const DepthMap& map, const ValidityPolicy& policy);

std::vector<Point3> project_point_cloud(const DepthMap& map, const CameraIntrinsics& k);
/// Rainbow colormap from the smallest (blue) to the largest (red) valid
/// value; invalid pixels are black.
RgbImage colorize_rainbow(const DepthMap& map);
/// Diverging blue-white-red colormap symmetric about zero; invalid pixels are black.
RgbImage colorize_diverging(const Mat& values, const Mask& valid);

/// ASCII PLY with float x/y/z vertex properties.
void write_ply(const std::vector<Point3>& points, const std::filesystem::path& path);

}  // namespace sd
