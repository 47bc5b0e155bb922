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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaledepth/depth.hpp"
#include "scaledepth/sasp.hpp"

// Procedural indoor-like scenes with exact depth. Geometry is drawn in unit
// depth and multiplied by the scene's scale family, so two families share the
// same layout distribution and differ only in absolute scale and appearance.
namespace sd::synth {

/// Depth of the background plane in unit depth.
inline constexpr double kBackgroundDepth = 0.9;

struct Category {
  std::string name;
  double scale_family = 10.0;
};

/// Three categories at scale 10 and three at scale 80.
std::vector<Category> default_categories();

struct SceneSpec {
  std::string category;
  double scale_family = 10.0;
  std::uint64_t layout_seed = 0;
  int height = 64;
  int width = 64;
};

struct Box {
  double depth;             // front face, unit depth
  double x_center, half_width;
  double top, bottom;       // camera-frame y, bottom rests on the floor
};

/// Unit-depth scene description. An absent surface is simply not drawn.
struct Layout {
  std::optional<double> floor_height;
  std::optional<double> side_wall;  // signed x distance of the wall plane
  std::vector<Box> boxes;
};

Layout sample_layout(std::uint64_t seed);

struct Sample {
  RgbImage image;
  DepthMap depth;
  int category = -1;  // index into the category list used to render
  SceneSpec spec;
};

/// Renders a layout; `categories` fixes the appearance palette by index.
Sample render(const Layout& layout, const SceneSpec& spec, std::span<const std::string> categories);
Sample generate(const SceneSpec& spec, std::span<const std::string> categories);

CameraIntrinsics intrinsics_for(int height, int width);

/// Keeps a uniformly random fraction of the valid pixels.
Sample sparsify(const Sample& sample, double keep_fraction, std::uint64_t seed);

/// Unit rows with pairwise |cos| < 0.5, found by bounded rejection sampling.
sasp::SceneEmbeddingTable build_pseudo_embeddings(const std::vector<std::string>& names, int dim, std::uint64_t seed);

struct Manifest {
  std::vector<SceneSpec> train;
  std::vector<SceneSpec> val;
};

/// Disjoint layout seeds across both splits; categories cycle so each split
/// is balanced to within one sample.
Manifest make_split(int n_train, int n_val, const std::vector<Category>& categories, int height, int width,
                    std::uint64_t seed);

/// One "category scale_family layout_seed height width" line per spec.
std::string format_specs(std::span<const SceneSpec> specs);
std::vector<SceneSpec> parse_specs(const std::string& text);
void write_manifest(const Manifest& m, const std::filesystem::path& dir);
Manifest read_manifest(const std::filesystem::path& dir);

inline constexpr double kDepthDivisor = 256.0;

/// Writes <dir>/<split>/<index>_rgb.png and _depth.png for every spec.
void materialize(const Manifest& m, const std::filesystem::path& dir, std::span<const std::string> categories);

/// Loads a materialized split back; labels come from `categories`.
std::vector<Sample> load_split(const std::filesystem::path& dir, const std::string& split,
                               std::span<const std::string> categories);

std::filesystem::path rgb_path(const std::filesystem::path& dir, const std::string& split, std::size_t index);
std::filesystem::path depth_path(const std::filesystem::path& dir, const std::string& split, std::size_t index);

}  // namespace sd::synth
