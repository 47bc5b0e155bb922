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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "scaledepth/losses.hpp"

using namespace sd;
using namespace sd::losses;

namespace {

DepthMap metric(Mat v) { return DepthMap::dense(std::move(v), DepthKind::Metric); }
DepthMap relative(Mat v) { return DepthMap::dense(std::move(v), DepthKind::Relative); }

Mat row(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST_CASE("si_loss hand cases") {
  LossConfig cfg;
  Mat gt = row({1.0, 2.0, 4.0, 3.0});
  SUBCASE("perfect metric map and proportional relative map") {
    CHECK(std::abs(si_loss(relative(gt / 5.0), metric(gt), metric(gt), cfg)) < 1e-9);
  }
  SUBCASE("metric map off by a factor e") {
    const double v = si_loss(relative(gt / 5.0), metric(gt / std::exp(1.0)), metric(gt), cfg);
    CHECK(std::abs(v - 10.0 * std::sqrt(0.15)) < 1e-9);
    CHECK(std::abs(v - 3.8730) < 1e-4);
  }
  SUBCASE("two pixels with delta (0, 2)") {
    Mat g2 = row({1.0, 1.0});
    Mat r = row({1.0, std::exp(-2.0)}) * 0.5;
    Mat g2s = g2 * 0.5;  // delta = log(0.5) - log r = (0, 2)
    CHECK(si_loss(relative(r), metric(g2s), metric(g2s), cfg) == doctest::Approx(10.0).epsilon(1e-12));
  }
}

TEST_CASE("si_loss errors") {
  LossConfig cfg;
  Mask one = Mask::Zero(1, 3);
  one(0, 1) = 1;
  DepthMap sparse(Mat::Ones(1, 3), one, DepthKind::Metric);
  CHECK_THROWS(si_loss(relative(Mat::Constant(1, 3, 0.5)), metric(Mat::Ones(1, 3)), sparse, cfg));
  Graph g;
  Mat bad = Mat::Constant(3, 1, 0.5);
  bad(1, 0) = -0.1;
  CHECK_THROWS_AS(si_loss(g.constant(bad), g.constant(Mat::Ones(3, 1)), metric(Mat::Ones(1, 3)), cfg),
                  std::domain_error);
  CHECK_THROWS(si_loss(relative(Mat::Constant(1, 2, 0.5)), metric(Mat::Ones(1, 3)), metric(Mat::Ones(1, 3)), cfg));
}

TEST_CASE("LossConfig validation") {
  CHECK_NOTHROW(LossConfig{}.validate());
  CHECK_THROWS(LossConfig{0.0, 0.15, 0.01}.validate());
  CHECK_THROWS(LossConfig{10, 1.5, 0.01}.validate());
  CHECK_THROWS(LossConfig{10, 0.15, -1}.validate());
}

TEST_CASE("si_loss properties match the scalar oracle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.05, 0.95), gtd(0.5, 70.0);
  std::bernoulli_distribution keep(0.7);
  LossConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 2 + static_cast<int>(rng() % 6), w = 2 + static_cast<int>(rng() % 6);
    Mat r(h, w), m(h, w), g(h, w);
    Mask valid(h, w);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      r.data()[i] = u(rng);
      m.data()[i] = gtd(rng);
      g.data()[i] = gtd(rng);
      valid.data()[i] = keep(rng);
    }
    valid(0, 0) = valid(1, 1) = 1;
    DepthMap gt(g, valid, DepthKind::Metric);
    const double got = si_loss(relative(r), metric(m), gt, cfg);
    std::vector<double> rv(r.data(), r.data() + r.size()), mv(m.data(), m.data() + m.size()),
        gv(g.data(), g.data() + g.size());
    std::vector<bool> use(valid.data(), valid.data() + valid.size());
    CHECK(got == doctest::Approx(oracle::si_loss(rv, mv, gv, use, 10.0, 0.15)).epsilon(1e-12));
    CHECK(got >= 0.0);

    // Permuting pixels consistently leaves the loss unchanged.
    std::vector<int> perm(static_cast<std::size_t>(r.size()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat rp(h, w), mp(h, w), gp(h, w);
    Mask vp(h, w);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      rp.data()[i] = r.data()[perm[i]];
      mp.data()[i] = m.data()[perm[i]];
      gp.data()[i] = g.data()[perm[i]];
      vp.data()[i] = valid.data()[perm[i]];
    }
    CHECK(si_loss(relative(rp), metric(mp), DepthMap(gp, vp, DepthKind::Metric), cfg) ==
          doctest::Approx(got).epsilon(1e-12));

    // Values under invalid pixels do not matter.
    Mat g2 = g, r2 = r;
    for (Eigen::Index i = 0; i < g2.size(); ++i)
      if (!valid.data()[i]) {
        g2.data()[i] = 123.0;
        r2.data()[i] = 0.999;
      }
    CHECK(si_loss(relative(r2), metric(m), DepthMap(g2, valid, DepthKind::Metric), cfg) == got);
  }
}

TEST_CASE("si_loss gradients") {
  std::mt19937_64 rng(13);
  Mat gt = oracle::random_mat(rng, 4, 5, 1.0, 30.0);
  Mask valid = Mask::Ones(4, 5);
  valid(2, 2) = 0;
  DepthMap g(gt, valid, DepthKind::Metric);
  auto f = [&](Graph&, const std::vector<Var>& in) { return si_loss(in[0], in[1], g, LossConfig{}); };
  CHECK(oracle::grad_check(f, {oracle::random_mat(rng, 20, 1, 0.1, 0.9), oracle::random_mat(rng, 20, 1, 1, 30)}) <
        1e-6);
}

TEST_CASE("ti_loss") {
  sasp::SceneLogits sure{Vec::Unit(3, 1), 0.07};
  CHECK(ti_loss(sure, 1) == 0.0);
  sasp::SceneLogits uniform{Vec::Constant(28, 1.0 / 28), 0.07};
  CHECK(ti_loss(uniform, 5) == doctest::Approx(std::log(28.0)).epsilon(1e-14));
  CHECK(std::abs(ti_loss(uniform, 5) - 3.3322) < 1e-4);
  sasp::SceneLogits half{Vec::Constant(2, 0.5), 0.07};
  CHECK(ti_loss(half, 0) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(ti_loss(half, 2), std::out_of_range);
  CHECK_THROWS_AS(ti_loss(half, -1), std::out_of_range);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const int c = 2 + static_cast<int>(rng() % 30);
    Mat logits = oracle::random_mat(rng, 1, c, -5, 5);
    Graph g;
    const int label = static_cast<int>(rng() % c);
    const double got = ti_loss(g.constant(logits), label).item();
    // -sum_i onehot_i log softmax_i, written out.
    double z = 0;
    for (int i = 0; i < c; ++i) z += std::exp(logits(0, i));
    double brute = 0;
    for (int i = 0; i < c; ++i) brute -= (i == label ? 1.0 : 0.0) * std::log(std::exp(logits(0, i)) / z);
    CHECK(std::abs(got - brute) < 1e-12);
  }
  auto f = [](Graph&, const std::vector<Var>& in) { return ti_loss(in[0], 2); };
  CHECK(oracle::grad_check(f, {oracle::random_mat(rng, 1, 5, -3, 3)}) < 1e-6);
}

TEST_CASE("total_loss") {
  LossConfig cfg;
  CHECK(total_loss(1.0, 1.0, cfg, 4).total == doctest::Approx(1.01));
  CHECK(total_loss(2.0, std::nullopt, cfg, 4).total == 2.0);
  LossBreakdown b = total_loss(3.873, 3.3322, cfg, 10);
  CHECK(std::abs(b.total - 3.9063) < 1e-4);
  CHECK(std::abs(b.total - (b.si + cfg.beta * b.ti)) < 1e-9);
  CHECK(b.valid_pixel_count == 10);
  LossConfig off{10, 0.15, 0.0};
  CHECK(total_loss(2.0, 50.0, off, 4).total == 2.0);
  CHECK_THROWS(total_loss(std::nan(""), 1.0, cfg, 4));
}
