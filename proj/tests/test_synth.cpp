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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "scaledepth/synth.hpp"

using namespace sd;
using namespace sd::synth;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& c : default_categories()) out.push_back(c.name);
  return out;
}

fs::path tmpdir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "scaledepth_test_synth" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("default categories") {
  auto cats = default_categories();
  CHECK(cats.size() == 6);
  int ten = 0, eighty = 0;
  for (const auto& c : cats) {
    ten += c.scale_family == 10.0;
    eighty += c.scale_family == 80.0;
  }
  CHECK(ten == 3);
  CHECK(eighty == 3);
}

TEST_CASE("generation is deterministic") {
  auto n = names();
  SceneSpec spec{"kitchen", 10.0, 42, 64, 64};
  Sample a = generate(spec, n), b = generate(spec, n);
  CHECK((a.image.pixels.array() == b.image.pixels.array()).all());
  CHECK((a.depth.values().array() == b.depth.values().array()).all());
  CHECK(a.category == 1);
  CHECK(a.depth.valid_count() == 64 * 64);
  CHECK(a.image.pixels.minCoeff() >= 0);
  CHECK(a.image.pixels.maxCoeff() <= 1);
}

TEST_CASE("scale families factor exactly") {
  auto n = names();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Sample near = generate(SceneSpec{"office", 10.0, seed, 32, 48}, n);
    Sample far = generate(SceneSpec{"office", 80.0, seed, 32, 48}, n);
    CHECK((far.depth.values().array() == 8.0 * near.depth.values().array()).all());
    CHECK((near.depth.values().array() / 10.0 == far.depth.values().array() / 80.0).all());
    CHECK(near.depth.values().minCoeff() > 0.05 * 10.0);
    CHECK(near.depth.values().maxCoeff() < 10.0);
    Sample odd = generate(SceneSpec{"office", 3.0, seed, 32, 48}, n);
    CHECK(((odd.depth.values() / 3.0 - near.depth.values() / 10.0).array().abs() < 1e-15).all());
  }
}

TEST_CASE("empty layout renders the background plane") {
  Sample s = render(Layout{}, SceneSpec{"street", 80.0, 0, 16, 16}, names());
  CHECK((s.depth.values().array() == 80.0 * kBackgroundDepth).all());
  CHECK(s.depth.valid_count() == 256);
}

TEST_CASE("nearer surfaces are brighter") {
  Sample s = generate(SceneSpec{"bedroom", 10.0, 7, 64, 64}, names());
  const Mat& d = s.depth.values();
  // Brightness is a decreasing function of depth within one category.
  for (int i = 0; i < 200; ++i) {
    const int a = (i * 97) % 4096, b = (i * 389 + 11) % 4096;
    const double da = d(a / 64, a % 64), db = d(b / 64, b % 64);
    const double la = s.image.pixels.row(a).sum(), lb = s.image.pixels.row(b).sum();
    if (da < db) CHECK(la >= lb);
    if (da > db) CHECK(la <= lb);
  }
}

TEST_CASE("unknown categories and bad specs are rejected") {
  CHECK_THROWS(generate(SceneSpec{"moon", 10.0, 0, 8, 8}, names()));
  CHECK_THROWS(generate(SceneSpec{"street", -1.0, 0, 8, 8}, names()));
  CHECK_THROWS(generate(SceneSpec{"street", 10.0, 0, 0, 8}, names()));
}

TEST_CASE("sparsify") {
  Sample s = generate(SceneSpec{"forest", 80.0, 1, 100, 100}, names());
  Sample same = sparsify(s, 1.0, 3);
  CHECK((same.depth.valid() == s.depth.valid()));
  Sample tenth = sparsify(s, 0.1, 3);
  const double n = 10000, p = 0.1;
  CHECK(std::abs(static_cast<double>(tenth.depth.valid_count()) - n * p) < 4 * std::sqrt(n * p * (1 - p)));
  Sample quarter = sparsify(sparsify(s, 0.5, 1), 0.5, 2);
  CHECK(std::abs(static_cast<double>(quarter.depth.valid_count()) - 2500) < 4 * std::sqrt(n * 0.25 * 0.75));
  CHECK((sparsify(s, 0.3, 9).depth.valid() == sparsify(s, 0.3, 9).depth.valid()));
  for (Eigen::Index i = 0; i < quarter.depth.valid().size(); ++i)
    if (quarter.depth.valid().data()[i]) CHECK(quarter.depth.values().data()[i] == s.depth.values().data()[i]);
  CHECK_THROWS(sparsify(s, 1.5, 0));
}

TEST_CASE("pseudo embeddings") {
  auto a = build_pseudo_embeddings(names(), 64, 3);
  auto b = build_pseudo_embeddings(names(), 64, 3);
  CHECK((a.embeddings.array() == b.embeddings.array()).all());
  CHECK(a.source == sasp::EmbeddingSource::Pseudo);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a.embeddings.row(i).norm() - 1.0) < 1e-9);
    for (int j = 0; j < i; ++j) CHECK(std::abs(a.embeddings.row(i).dot(a.embeddings.row(j))) < 0.5);
  }
  auto two = build_pseudo_embeddings({"x", "y"}, 64, 0);
  CHECK(std::abs(two.embeddings.row(0).dot(two.embeddings.row(1))) < 0.5);
  // Fifty mutually separated directions do not exist in two dimensions.
  std::vector<std::string> many;
  for (int i = 0; i < 50; ++i) many.push_back("c" + std::to_string(i));
  CHECK_THROWS_AS(build_pseudo_embeddings(many, 2, 0), std::runtime_error);
  CHECK_THROWS(build_pseudo_embeddings({"x", "x"}, 8, 0));
}

TEST_CASE("splits") {
  auto cats = default_categories();
  Manifest m = make_split(8, 5, cats, 64, 64, 7);
  CHECK(m.train.size() == 8);
  CHECK(m.val.size() == 5);
  std::set<std::uint64_t> seeds;
  for (const auto& s : m.train) seeds.insert(s.layout_seed);
  CHECK(seeds.size() == 8);
  for (const auto& s : m.val) CHECK(seeds.count(s.layout_seed) == 0);

  Manifest big = make_split(100, 37, cats, 32, 32, 1);
  for (const auto* split : {&big.train, &big.val}) {
    std::map<std::string, int> count;
    for (const auto& s : *split) count[s.category]++;
    int lo = 1 << 30, hi = 0;
    for (const auto& c : cats) {
      lo = std::min(lo, count[c.name]);
      hi = std::max(hi, count[c.name]);
    }
    CHECK(hi - lo <= 1);
  }
  for (const auto& s : big.train) {
    const auto it = std::find_if(cats.begin(), cats.end(), [&](const Category& c) { return c.name == s.category; });
    CHECK(s.scale_family == it->scale_family);
  }
}

TEST_CASE("manifest round trip") {
  Manifest m = make_split(6, 3, default_categories(), 64, 64, 9);
  m.train[0].scale_family = 0.1;  // needs shortest round-trip formatting
  fs::path dir = tmpdir("manifest");
  write_manifest(m, dir);
  const std::string first = slurp(dir / "train.manifest");
  Manifest back = read_manifest(dir);
  CHECK(format_specs(back.train) == format_specs(m.train));
  CHECK(back.train[0].scale_family == 0.1);
  write_manifest(back, dir);
  CHECK(slurp(dir / "train.manifest") == first);
  CHECK_THROWS(parse_specs("kitchen 10 1 64\n"));
  CHECK_THROWS(parse_specs("kitchen 10 1 64 64 extra\n"));
}

TEST_CASE("materialized samples reload") {
  auto n = names();
  Manifest m = make_split(3, 2, default_categories(), 32, 32, 4);
  fs::path dir = tmpdir("materialized");
  materialize(m, dir, n);
  CHECK(fs::exists(rgb_path(dir, "val", 1)));
  std::vector<Sample> train = load_split(dir, "train", n);
  CHECK(train.size() == 3);
  for (std::size_t i = 0; i < train.size(); ++i) {
    Sample ref = generate(m.train[i], n);
    CHECK(train[i].category == ref.category);
    CHECK((train[i].depth.values() - ref.depth.values()).cwiseAbs().maxCoeff() <= 1.0 / 512 + 1e-12);
    CHECK((train[i].image.pixels - ref.image.pixels).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);
  }
  CHECK_THROWS(load_split(dir, "test", n));
}
