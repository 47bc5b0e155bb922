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

#include "scaledepth/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace sd::synth {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Fully saturated-ish hue wheel, one hue per category index.
std::array<double, 3> albedo(int index, int count) {
  const double h = 6.0 * index / std::max(count, 1);
  const double s = 0.7;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = 1 - s, q = 1 - s * f, t = 1 - s * (1 - f);
  switch (sector) {
    case 0: return {1, t, p};
    case 1: return {q, 1, p};
    case 2: return {p, 1, t};
    case 3: return {p, q, 1};
    case 4: return {t, p, 1};
    default: return {1, p, q};
  }
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<Category> default_categories() {
  return {{"bedroom", 10.0}, {"kitchen", 10.0}, {"office", 10.0},
          {"street", 80.0},  {"highway", 80.0}, {"forest", 80.0}};
}

CameraIntrinsics intrinsics_for(int height, int width) {
  const double f = 1.5 * width;
  return CameraIntrinsics{f, f, width / 2.0, height / 2.0};
}

Layout sample_layout(std::uint64_t seed) {
  Rng rng(seed);
  Layout l;
  l.floor_height = uniform(rng, 0.15, 0.3);
  const double side = rng() % 2 ? 1.0 : -1.0;
  l.side_wall = side * uniform(rng, 0.25, 0.45);
  if (rng() % 2) {
    Box b;
    b.depth = uniform(rng, 0.65, 0.9) * kBackgroundDepth;
    b.x_center = uniform(rng, -0.15, 0.15) * b.depth;
    b.half_width = 0.5 * uniform(rng, 0.15, 0.3) * b.depth;
    b.bottom = *l.floor_height;
    b.top = b.bottom - uniform(rng, 0.1, 0.3) * b.depth;
    l.boxes.push_back(b);
  }
  return l;
}

Sample render(const Layout& layout, const SceneSpec& spec, std::span<const std::string> categories) {
  if (spec.height <= 0 || spec.width <= 0) throw std::invalid_argument("scene size must be positive");
  if (!(spec.scale_family > 0) || !std::isfinite(spec.scale_family))
    throw std::invalid_argument("scale family must be positive");
  auto it = std::find(categories.begin(), categories.end(), spec.category);
  if (it == categories.end()) throw std::invalid_argument("unknown scene category: " + spec.category);
  const int cat = static_cast<int>(it - categories.begin());
  const auto color = albedo(cat, static_cast<int>(categories.size()));
  const CameraIntrinsics k = intrinsics_for(spec.height, spec.width);

  Mat depth(spec.height, spec.width);
  Mat rgb(static_cast<Eigen::Index>(spec.height) * spec.width, 3);
  for (int y = 0; y < spec.height; ++y) {
    const double ry = (y + 0.5 - k.cy) / k.fy;
    for (int x = 0; x < spec.width; ++x) {
      const double rx = (x + 0.5 - k.cx) / k.fx;
      double z = kBackgroundDepth;
      if (layout.floor_height && ry > 0) z = std::min(z, *layout.floor_height / ry);
      if (layout.side_wall && rx * *layout.side_wall > 0) z = std::min(z, *layout.side_wall / rx);
      for (const Box& b : layout.boxes) {
        const double px = rx * b.depth, py = ry * b.depth;
        if (b.depth < z && std::abs(px - b.x_center) < b.half_width && py > b.top && py < b.bottom) z = b.depth;
      }
      depth(y, x) = z * spec.scale_family;
      const double shade = 1.05 - 0.9 * z;
      const Eigen::Index p = static_cast<Eigen::Index>(y) * spec.width + x;
      for (int c = 0; c < 3; ++c) rgb(p, c) = std::clamp(color[c] * shade, 0.0, 1.0);
    }
  }
  return Sample{RgbImage{spec.height, spec.width, std::move(rgb)}, DepthMap::dense(std::move(depth), DepthKind::Metric),
                cat, spec};
}

Sample generate(const SceneSpec& spec, std::span<const std::string> categories) {
  return render(sample_layout(spec.layout_seed), spec, categories);
}

Sample sparsify(const Sample& sample, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction >= 0 && keep_fraction <= 1)) throw std::invalid_argument("sparsify: fraction outside [0, 1]");
  Rng rng(seed);
  std::bernoulli_distribution keep(keep_fraction);
  Mask valid = sample.depth.valid();
  for (Eigen::Index i = 0; i < valid.size(); ++i)
    if (valid.data()[i] && !keep(rng)) valid.data()[i] = 0;
  Sample out = sample;
  out.depth = DepthMap(sample.depth.values(), std::move(valid), DepthKind::Metric);
  return out;
}

sasp::SceneEmbeddingTable build_pseudo_embeddings(const std::vector<std::string>& names, int dim, std::uint64_t seed) {
  if (names.empty()) throw std::invalid_argument("build_pseudo_embeddings: no names");
  if (dim <= 0) throw std::invalid_argument("build_pseudo_embeddings: dimension must be positive");
  constexpr int kMaxTries = 1000;
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Mat table(static_cast<Eigen::Index>(names.size()), dim);
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxTries && !ok; ++attempt) {
      Vec v(dim);
      for (int j = 0; j < dim; ++j) v(j) = normal(rng);
      if (v.norm() == 0) continue;
      v.normalize();
      ok = true;
      for (Eigen::Index j = 0; j < i && ok; ++j) ok = std::abs(table.row(j).dot(v)) < 0.5;
      if (ok) table.row(i) = v.transpose();
    }
    if (!ok) throw std::runtime_error("build_pseudo_embeddings: could not separate the embeddings");
  }
  sasp::SceneEmbeddingTable t{names, std::move(table), sasp::EmbeddingSource::Pseudo};
  t.validate();
  return t;
}

Manifest make_split(int n_train, int n_val, const std::vector<Category>& categories, int height, int width,
                    std::uint64_t seed) {
  if (n_train < 0 || n_val < 0) throw std::invalid_argument("make_split: negative split size");
  if (categories.empty()) throw std::invalid_argument("make_split: no categories");
  Rng rng(seed);
  std::unordered_set<std::uint64_t> used;
  auto fill = [&](int n, std::vector<SceneSpec>& out) {
    for (int i = 0; i < n; ++i) {
      std::uint64_t s;
      do s = rng(); while (!used.insert(s).second);
      const Category& c = categories[static_cast<std::size_t>(i) % categories.size()];
      out.push_back(SceneSpec{c.name, c.scale_family, s, height, width});
    }
  };
  Manifest m;
  fill(n_train, m.train);
  fill(n_val, m.val);
  return m;
}

std::string format_specs(std::span<const SceneSpec> specs) {
  std::string out;
  for (const auto& s : specs)
    out += s.category + ' ' + format_double(s.scale_family) + ' ' + std::to_string(s.layout_seed) + ' ' +
           std::to_string(s.height) + ' ' + std::to_string(s.width) + '\n';
  return out;
}

std::vector<SceneSpec> parse_specs(const std::string& text) {
  std::vector<SceneSpec> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    SceneSpec s;
    std::string extra;
    if (!(ls >> s.category >> s.scale_family >> s.layout_seed >> s.height >> s.width) || (ls >> extra))
      throw std::runtime_error("manifest line " + std::to_string(lineno) + " is malformed");
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const Manifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (auto [name, specs] : {std::pair{"train", &m.train}, std::pair{"val", &m.val}}) {
    std::ofstream f(dir / (std::string(name) + ".manifest"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
    f << format_specs(*specs);
  }
}

Manifest read_manifest(const std::filesystem::path& dir) {
  auto read = [&](const std::string& name) {
    std::ifstream f(dir / (name + ".manifest"), std::ios::binary);
    if (!f) throw std::runtime_error("missing manifest " + (dir / (name + ".manifest")).string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_specs(ss.str());
  };
  return Manifest{read("train"), read("val")};
}

std::filesystem::path rgb_path(const std::filesystem::path& dir, const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu_rgb.png", index);
  return dir / split / buf;
}

std::filesystem::path depth_path(const std::filesystem::path& dir, const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu_depth.png", index);
  return dir / split / buf;
}

void materialize(const Manifest& m, const std::filesystem::path& dir, std::span<const std::string> categories) {
  write_manifest(m, dir);
  for (auto [name, specs] : {std::pair{"train", &m.train}, std::pair{"val", &m.val}}) {
    std::filesystem::create_directories(dir / name);
    for (std::size_t i = 0; i < specs->size(); ++i) {
      Sample s = generate((*specs)[i], categories);
      save_rgb_png(s.image, rgb_path(dir, name, i));
      save_depth_png(s.depth, depth_path(dir, name, i), kDepthDivisor);
    }
  }
}

std::vector<Sample> load_split(const std::filesystem::path& dir, const std::string& split,
                               std::span<const std::string> categories) {
  Manifest m = read_manifest(dir);
  const std::vector<SceneSpec>& specs = split == "train" ? m.train : m.val;
  if (split != "train" && split != "val") throw std::invalid_argument("unknown split: " + split);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto it = std::find(categories.begin(), categories.end(), specs[i].category);
    if (it == categories.end()) throw std::runtime_error("category not in embedding table: " + specs[i].category);
    out.push_back(Sample{load_rgb_png(rgb_path(dir, split, i)), load_depth_png(depth_path(dir, split, i), kDepthDivisor),
                         static_cast<int>(it - categories.begin()), specs[i]});
  }
  return out;
}

}  // namespace sd::synth
