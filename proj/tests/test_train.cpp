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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "scaledepth/checkpoint.hpp"
#include "scaledepth/train.hpp"

using namespace sd;
using namespace sd::train;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "scaledepth_test_train" / name;
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

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& c : synth::default_categories()) out.push_back(c.name);
  return out;
}

std::vector<synth::Sample> data(int n, int size) {
  std::vector<synth::Sample> out;
  synth::Manifest m = synth::make_split(n, 0, synth::default_categories(), size, size, 5);
  for (const auto& s : m.train) out.push_back(synth::generate(s, names()));
  return out;
}

TrainConfig toy(int iterations) {
  TrainConfig c;
  c.model = network::ModelConfig::tiny();
  c.iterations = iterations;
  c.batch_size = 2;
  c.optim.lr = 1e-3;
  c.log_every = 1;
  return c;
}

}  // namespace

TEST_CASE("ini round trip") {
  TrainConfig c = TrainConfig::from_ini_text(
      "[model]\nwidth = 16\nheads = 2\nencoder_widths = 8,8,16,16\n\n[loss]\nbeta = 0\n\n[optim]\nlr = 0.0005\n\n"
      "[train]\niterations = 10\nbatch_size = 3\nseed = 12345678901\ncrop_size = 32\n\n[eval]\nmax_depth = 80\n");
  CHECK(c.model.width == 16);
  CHECK(c.model.heads == 2);
  CHECK(c.model.encoder_widths == std::array<int, 4>{8, 8, 16, 16});
  CHECK(c.loss.beta == 0);
  CHECK(c.optim.lr == 0.0005);
  CHECK(c.iterations == 10);
  CHECK(c.batch_size == 3);
  CHECK(c.seed == 12345678901ULL);
  CHECK(c.crop_size == 32);
  CHECK(c.eval_policy.max_depth == 80);
  TrainConfig back = TrainConfig::from_ini_text(c.to_ini());
  CHECK(back.to_ini() == c.to_ini());
  CHECK(back.model.hash() == c.model.hash());
  CHECK(TrainConfig::from_ini_text("").to_ini() == TrainConfig{}.to_ini());
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(c.optim.schedule == LrSchedule::Constant);
  CHECK(c.lr_at(0) == c.optim.lr);
  CHECK(c.lr_at(c.iterations - 1) == c.optim.lr);

  c = TrainConfig::from_ini_text("[optim]\nlr = 0.002\nschedule = cosine\n\n[train]\niterations = 100\n");
  CHECK(c.optim.schedule == LrSchedule::Cosine);
  CHECK(TrainConfig::from_ini_text(c.to_ini()).optim.schedule == LrSchedule::Cosine);
  CHECK(c.lr_at(0) == 0.002);
  CHECK(c.lr_at(50) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(c.lr_at(25) == doctest::Approx(0.001 * (1 + std::sqrt(0.5))).epsilon(1e-12));
  CHECK(std::abs(c.lr_at(100)) < 1e-18);
  for (int i = 1; i < 100; ++i) CHECK(c.lr_at(i) < c.lr_at(i - 1));
}

TEST_CASE("ini errors") {
  CHECK_THROWS(TrainConfig::from_ini_text("[optim]\nlearning_rate = 1\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[model]\ndepth = 3\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[nope]\nx = 1\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[train]\nbatch_size = two\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[train]\nbatch_size = 0\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[train]\ncrop_size = 40\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[optim]\nlr = -1\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[optim]\nschedule = linear\n"));
  CHECK_THROWS(TrainConfig::from_ini_text("[model]\nwidth = 10\n"));
  CHECK_THROWS(TrainConfig::from_ini(fs::path("/nonexistent/config.ini")));
}

TEST_CASE("seed environment override") {
  TrainConfig c;
  c.seed = 3;
  ::setenv("SCALEDEPTH_SEED", "77", 1);
  c.apply_env();
  CHECK(c.seed == 77);
  ::setenv("SCALEDEPTH_SEED", "x", 1);
  CHECK_THROWS(c.apply_env());
  ::unsetenv("SCALEDEPTH_SEED");
  c.apply_env();
  CHECK(c.seed == 77);
}

TEST_CASE("adamw matches a scalar oracle") {
  ParameterSet ps;
  Parameter& enc = ps.add("encoder.w", Mat::Constant(1, 2, 0.5), true);
  ps.add("head.w", Mat::Constant(2, 1, -1.0), false);
  (void)enc;
  OptimConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  cfg.encoder_lr_scale = 0.5;
  for (bool pretrained : {false, true}) {
    ParameterSet p = ps;
    AdamW opt(p);
    std::vector<double> x = {0.5, 0.5, -1.0, -1.0}, m(4, 0), v(4, 0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 1; t <= 5; ++t) {
      std::vector<Mat> grads = p.zeros_like();
      std::vector<double> g(4);
      for (double& gi : g) gi = u(rng);
      grads[0] << g[0], g[1];
      grads[1] << g[2], g[3];
      opt.step(p, grads, cfg, pretrained);
      for (int i = 0; i < 4; ++i) {
        const double lr = (pretrained && i < 2) ? cfg.lr * cfg.encoder_lr_scale : cfg.lr;
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
        x[i] = x[i] * (1 - lr * cfg.weight_decay) - lr * mh / (std::sqrt(vh) + cfg.eps);
      }
      CHECK(std::abs(p[0].value(0, 0) - x[0]) < 1e-14);
      CHECK(std::abs(p[0].value(0, 1) - x[1]) < 1e-14);
      CHECK(std::abs(p[1].value(0, 0) - x[2]) < 1e-14);
      CHECK(std::abs(p[1].value(1, 0) - x[3]) < 1e-14);
    }
    CHECK(opt.steps() == 5);
  }
}

TEST_CASE("crop") {
  synth::Sample s = data(1, 64)[0];
  synth::Sample c = crop(s, 8, 16, 32, 32);
  CHECK(c.image.height == 32);
  CHECK(c.depth.values().rows() == 32);
  CHECK(c.depth.values()(0, 0) == s.depth.values()(8, 16));
  CHECK(c.image.pixels.row(31 * 32 + 31) == s.image.pixels.row(39 * 64 + 47));
  CHECK(c.category == s.category);
  CHECK_THROWS(crop(s, 40, 0, 32, 32));
}

TEST_CASE("beta zero drops the text-image term") {
  auto names_ = names();
  auto table = synth::build_pseudo_embeddings(names_, 8, 0);
  TrainConfig c = toy(1);
  c.loss.beta = 0;
  Trainer t(c, &table);
  synth::Sample s = data(1, 32)[0];
  losses::LossBreakdown b = t.sample_loss(s, nullptr);
  CHECK(b.ti > 0);
  CHECK(b.total == b.si);

  std::vector<Mat> with_table = t.model().parameters().zeros_like();
  t.sample_loss(s, &with_table);
  Trainer plain(c, nullptr);
  std::vector<Mat> without = plain.model().parameters().zeros_like();
  plain.sample_loss(s, &without);
  for (std::size_t i = 0; i < with_table.size(); ++i) CHECK((with_table[i].array() == without[i].array()).all());

  c.loss.beta = 0.5;
  Trainer weighted(c, &table);
  losses::LossBreakdown w = weighted.sample_loss(s, nullptr);
  CHECK(std::abs(w.total - (w.si + 0.5 * w.ti)) < 1e-12);
}

TEST_CASE("batch loss is the mean of per-image losses") {
  TrainConfig c = toy(1);
  Trainer t(c, nullptr);
  auto d = data(2, 32);
  const double a = t.sample_loss(d[0], nullptr).total, b = t.sample_loss(d[1], nullptr).total;
  StepLog l = t.step(d);
  CHECK(std::abs(l.total - 0.5 * (a + b)) < 1e-12);
  CHECK(t.iteration() == 1);
}

TEST_CASE("training is deterministic and resumes exactly") {
  auto d = data(4, 32);
  TrainConfig c = toy(6);
  c.crop_size = 0;
  Trainer a(c, nullptr), b(c, nullptr);
  a.fit(d);
  b.fit(d);
  CHECK(format_log(a.log()) == format_log(b.log()));

  fs::path dir = tmpdir("resume");
  TrainConfig half = c;
  half.iterations = 3;
  Trainer first(half, nullptr);
  first.fit(d);
  first.save(dir / "ck.sdck");
  Trainer second(c, nullptr);
  second.resume(dir / "ck.sdck");
  CHECK(second.iteration() == 3);
  second.fit(d);
  REQUIRE(second.log().size() == a.log().size());
  for (std::size_t i = 0; i < a.log().size(); ++i) CHECK(std::abs(second.log()[i].total - a.log()[i].total) <= 1e-6);
  for (std::size_t i = 0; i < a.model().parameters().size(); ++i)
    CHECK((a.model().parameters()[i].value.array() == second.model().parameters()[i].value.array()).all());
}

TEST_CASE("crop training draws valid windows") {
  auto d = data(2, 64);
  TrainConfig c = toy(2);
  c.crop_size = 32;
  Trainer t(c, nullptr);
  t.fit(d);
  CHECK(t.log().size() == 2);
  c.crop_size = 96;
  Trainer big(c, nullptr);
  CHECK_THROWS(big.fit(d));
}

TEST_CASE("checkpoint round trip is bit exact") {
  fs::path dir = tmpdir("checkpoint");
  network::Model m(network::ModelConfig::tiny(), 9);
  checkpoint::save_model(m, dir / "a.sdck");
  network::Model back = checkpoint::load_model(dir / "a.sdck");
  checkpoint::save_model(back, dir / "b.sdck");
  CHECK(slurp(dir / "a.sdck") == slurp(dir / "b.sdck"));
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    CHECK((m.parameters()[i].value.array() == back.parameters()[i].value.array()).all());

  network::ModelConfig other = network::ModelConfig::tiny();
  other.bins = 6;
  network::Model wrong(other, 0);
  CHECK_THROWS_AS(checkpoint::restore_parameters(wrong, checkpoint::load_archive(dir / "a.sdck")),
                  checkpoint::ConfigMismatch);

  std::string bytes = slurp(dir / "a.sdck");
  std::ofstream(dir / "trunc.sdck", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS(checkpoint::load_model(dir / "trunc.sdck"));
  std::ofstream(dir / "junk.sdck", std::ios::binary) << "not a checkpoint";
  CHECK_THROWS(checkpoint::load_model(dir / "junk.sdck"));
  CHECK_THROWS(checkpoint::load_model(dir / "missing.sdck"));
}

TEST_CASE("evaluate") {
  auto d = data(3, 32);
  network::Model m(network::ModelConfig::tiny(), 0);
  EvalResult oracle_run = evaluate(m, d, ValidityPolicy{1e-3, 80}, true);
  CHECK(oracle_run.per_image.size() == 3);
  CHECK(oracle_run.mean.arel == 0);
  CHECK(oracle_run.mean.rmse == 0);
  CHECK(oracle_run.mean.delta1 == 1);

  EvalResult real = evaluate(m, d, ValidityPolicy{1e-3, 80});
  CHECK(real.mean_scale > 0);
  CHECK(real.mean.delta1 <= real.mean.delta2);

  // Samples 0..2 cycle bedroom, kitchen, office at scale 10; a floor of 20 m empties them.
  d.push_back(synth::generate(synth::SceneSpec{"street", 80, 1, 32, 32}, names()));
  EvalResult skipped = evaluate(m, d, ValidityPolicy{20, 80}, true);
  CHECK(skipped.skipped == std::vector<std::size_t>{0, 1, 2});
  CHECK(skipped.scored == std::vector<std::size_t>{3});
  CHECK(skipped.per_image.size() == 1);
  d.pop_back();
  CHECK_THROWS(evaluate(m, d, ValidityPolicy{20, 80}, true));
}
