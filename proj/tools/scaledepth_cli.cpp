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


#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scaledepth/checkpoint.hpp"
#include "scaledepth/sasp.hpp"
#include "scaledepth/synth.hpp"
#include "scaledepth/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sd;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> default_names() {
  std::vector<std::string> names;
  for (const auto& c : synth::default_categories()) names.push_back(c.name);
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) throw std::runtime_error("cannot write " + path.string());
}

json report_json(const metrics::MetricReport& r) { return json::parse(metrics::to_json(r)); }

// ---- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  fs::path out;
  int train = 64, val = 16, height = 64, width = 64;
  std::uint64_t seed = 0;
};

void gen_data(const GenDataArgs& a) {
  if (a.train <= 0) throw UsageError("--train must be at least 1");
  if (a.val < 0) throw UsageError("--val must be non-negative");
  const auto cats = synth::default_categories();
  synth::Manifest m = synth::make_split(a.train, a.val, cats, a.height, a.width, a.seed);
  fs::create_directories(a.out);
  synth::write_manifest(m, a.out);
  synth::materialize(m, a.out, default_names());
  std::printf("wrote %zu train and %zu val samples to %s\n", m.train.size(), m.val.size(), a.out.c_str());
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  fs::path config, data, out, embeddings, resume;
  bool pseudo_embeddings = false;
  int checkpoint_every = 0;
};

std::optional<sasp::SceneEmbeddingTable> table_from(const fs::path& file, bool pseudo, int dim, std::uint64_t seed) {
  if (!file.empty() && pseudo) throw UsageError("--embeddings and --pseudo-embeddings are exclusive");
  if (!file.empty()) return sasp::load_embedding_table(file);
  if (pseudo) return synth::build_pseudo_embeddings(default_names(), dim, seed);
  return std::nullopt;
}

std::vector<std::string> label_names(const std::optional<sasp::SceneEmbeddingTable>& table) {
  return table ? table->names : default_names();
}

void train_cmd(TrainArgs a) {
  train::TrainConfig cfg = train::TrainConfig::from_ini(a.config);
  cfg.apply_env();
  std::optional<sasp::SceneEmbeddingTable> table = table_from(a.embeddings, a.pseudo_embeddings, cfg.model.text_dim, cfg.seed);
  if (table && table->dim() != cfg.model.text_dim)
    throw std::runtime_error("embedding width " + std::to_string(table->dim()) + " differs from model text_dim " +
                             std::to_string(cfg.model.text_dim));
  const auto names = label_names(table);
  std::vector<synth::Sample> train_set = synth::load_split(a.data, "train", names);
  std::vector<synth::Sample> val_set;
  if (fs::exists(a.data / "val")) val_set = synth::load_split(a.data, "val", names);
  for (const auto& s : train_set)
    if (cfg.crop_size > s.image.height || cfg.crop_size > s.image.width)
      throw std::runtime_error("crop_size " + std::to_string(cfg.crop_size) + " exceeds a training image");

  fs::create_directories(a.out);
  write_text(a.out / "config.ini", cfg.to_ini());
  train::Trainer trainer(cfg, table ? &*table : nullptr);
  if (!a.resume.empty()) trainer.resume(a.resume);

  json record;
  record["config_hash"] = cfg.model.hash();
  record["seed"] = cfg.seed;
  record["text_image_loss"] = table.has_value();
  record["checkpoints"] = json::array();
  record["validation"] = json::array();
  const fs::path log_path = a.out / "loss.log";
  write_text(log_path, train::format_log(trainer.log()));
  std::ofstream log(log_path, std::ios::app);

  auto checkpoint = [&](const std::string& name) {
    const fs::path path = a.out / name;
    trainer.save(path);
    record["checkpoints"].push_back(path.string());
    if (!val_set.empty()) {
      train::EvalResult r = train::evaluate(trainer.model(), val_set, cfg.eval_policy);
      json v = report_json(r.mean);
      v["iteration"] = trainer.iteration();
      v["mean_scale"] = r.mean_scale;
      record["validation"].push_back(v);
    }
    write_text(a.out / "run.json", record.dump(2) + "\n");
  };

  trainer.fit(train_set, [&](const train::StepLog& l) {
    log << train::format_log(std::span<const train::StepLog>(&l, 1)) << std::flush;
    const int done = trainer.iteration();
    if (cfg.log_every > 0 && (l.iteration % cfg.log_every == 0 || done == cfg.iterations))
      std::printf("iter %d si %.6f ti %.6f total %.6f\n", l.iteration, l.si, l.ti, l.total);
    if (a.checkpoint_every > 0 && done % a.checkpoint_every == 0 && done != cfg.iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06d.sdck", done);
      checkpoint(name);
    }
  });
  checkpoint("final.sdck");
  std::printf("final checkpoint %s\n", (a.out / "final.sdck").c_str());
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoint, data, out, error_maps;
  std::string split = "val";
  std::optional<double> min_depth, max_depth;
  bool oracle = false;
};

void eval_cmd(const EvalArgs& a) {
  checkpoint::Archive archive = checkpoint::load_archive(a.checkpoint);
  network::Model model = checkpoint::load_model(a.checkpoint);
  ValidityPolicy policy;
  if (auto it = archive.meta.find("train_config"); it != archive.meta.end())
    policy = train::TrainConfig::from_ini_text(it->second).eval_policy;
  if (a.min_depth) policy.min_depth = *a.min_depth;
  if (a.max_depth) policy.max_depth = *a.max_depth;
  policy.validate();

  std::vector<synth::Sample> data = synth::load_split(a.data, a.split, default_names());
  train::EvalResult r = train::evaluate(model, data, policy, a.oracle);
  for (std::size_t i : r.skipped)
    std::fprintf(stderr, "warning: image %zu has no valid pixels under the policy; skipped\n", i);

  json images = json::array();
  std::ostringstream per_image;
  std::size_t next = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (next < r.scored.size() && r.scored[next] == i) {
      const auto& m = r.per_image[next++];
      images.push_back({{"index", i}, {"metrics", report_json(m)}});
      per_image << i << " arel " << m.arel << " rmse " << m.rmse << " delta1 " << m.delta1 << '\n';
    } else {
      images.push_back({{"index", i}, {"error", "no valid pixels under the policy"}});
      per_image << i << " skipped: no valid pixels under the policy\n";
    }
  }
  json doc{{"checkpoint", a.checkpoint.string()}, {"split", a.split},      {"oracle", a.oracle},
           {"min_depth", policy.min_depth},      {"max_depth", policy.max_depth}, {"mean", report_json(r.mean)},
           {"mean_scale", r.mean_scale},         {"skipped", r.skipped},    {"images", images}};

  fs::create_directories(a.out);
  write_text(a.out / "metrics.txt", metrics::to_text(r.mean));
  write_text(a.out / "metrics.json", doc.dump(2) + "\n");
  write_text(a.out / "per_image.txt", per_image.str());
  std::cout << metrics::to_text(r.mean);

  if (!a.error_maps.empty() && !a.oracle) {
    fs::create_directories(a.error_maps);
    for (std::size_t i : r.scored) {
      network::Prediction p = network::predict_padded(model, data[i].image, nullptr);
      DepthMap gt = apply_validity(data[i].depth, policy);
      Mat rel = (p.metric.values() - gt.values()).cwiseQuotient(gt.values());
      char name[32];
      std::snprintf(name, sizeof name, "%06zu_error.png", i);
      save_rgb_png(colorize_diverging(rel, gt.valid()), a.error_maps / name);
    }
  }
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
  fs::path checkpoint, image, depth_out, color_out, ply_out, embeddings, meta_out;
  std::optional<double> fx, fy, cx, cy;
  double divisor = synth::kDepthDivisor;
};

void infer_cmd(const InferArgs& a) {
  network::Model model = checkpoint::load_model(a.checkpoint);
  RgbImage image = load_rgb_png(a.image);
  std::optional<sasp::SceneEmbeddingTable> table;
  if (!a.embeddings.empty()) table = sasp::load_embedding_table(a.embeddings);
  const int ph = (image.height + 31) / 32 * 32, pw = (image.width + 31) / 32 * 32;
  network::Prediction p = network::predict_padded(model, image, table ? &*table : nullptr);

  save_depth_png(p.metric, a.depth_out, a.divisor);
  if (!a.color_out.empty()) save_rgb_png(colorize_rainbow(p.relative), a.color_out);
  const int given = a.fx.has_value() + a.fy.has_value() + a.cx.has_value() + a.cy.has_value();
  if (given != 0 && given != 4) throw UsageError("intrinsics need all of --fx --fy --cx --cy");
  if (given == 4) {
    if (a.ply_out.empty()) throw UsageError("intrinsics given without --ply");
    write_ply(project_point_cloud(p.metric, CameraIntrinsics{*a.fx, *a.fy, *a.cx, *a.cy}), a.ply_out);
  } else if (!a.ply_out.empty()) {
    throw UsageError("--ply needs intrinsics --fx --fy --cx --cy");
  }

  json meta{{"input", a.image.string()},
            {"height", image.height},
            {"width", image.width},
            {"padded_height", ph},
            {"padded_width", pw},
            {"padding", ph != image.height || pw != image.width ? "reflect" : "none"},
            {"scale", p.scale.value},
            {"depth_divisor", a.divisor}};
  if (p.scene) {
    meta["scene"] = table->names[static_cast<std::size_t>(p.scene->argmax())];
    meta["scene_probability"] = p.scene->probs(p.scene->argmax());
  }
  write_text(a.meta_out.empty() ? fs::path(a.depth_out.string() + ".json") : a.meta_out, meta.dump(2) + "\n");
  std::printf("scale %.17g\n", p.scale.value);
  if (p.scene) std::printf("scene %s\n", meta["scene"].get<std::string>().c_str());
}

// ---- export-embeddings --------------------------------------------------------

struct ExportArgs {
  fs::path out;
  std::vector<std::string> names;
  int dim = 64;
  std::uint64_t seed = 0;
};

void export_cmd(const ExportArgs& a) {
  const auto names = a.names.empty() ? default_names() : a.names;
  sasp::save_embedding_table(synth::build_pseudo_embeddings(names, a.dim, a.seed), a.out);
  std::printf("wrote %zu embeddings of width %d to %s\n", names.size(), a.dim, a.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular metric depth from relative depth and a predicted scene scale"};
  app.name("scaledepth");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset with a manifest");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--train", gen.train, "Training samples")->capture_default_str();
  gen_cmd->add_option("--val", gen.val, "Validation samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Split seed")->capture_default_str();
  gen_cmd->add_option("--height", gen.height, "Image height")->capture_default_str();
  gen_cmd->add_option("--width", gen.width, "Image width")->capture_default_str();

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train a model from a config file");
  train_sub->add_option("--config", tr.config, "INI config with [model] [loss] [optim] [train] [eval]")
      ->required()
      ->check(CLI::ExistingFile);
  train_sub->add_option("--data", tr.data, "Dataset directory written by gen-data")->required();
  train_sub->add_option("--out", tr.out, "Run directory for checkpoints and logs")->required();
  train_sub->add_option("--embeddings", tr.embeddings, "Scene embedding table; enables the text-image loss");
  train_sub->add_flag("--pseudo-embeddings", tr.pseudo_embeddings,
                      "Use seeded pseudo embeddings for the default categories; enables the text-image loss");
  train_sub->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint interval in iterations (0: end only)");
  train_sub->add_option("--resume", tr.resume, "Continue from a checkpoint written by train");

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  eval_sub->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_sub->add_option("--data", ev.data, "Dataset directory")->required();
  eval_sub->add_option("--split", ev.split, "Split name")->capture_default_str();
  eval_sub->add_option("--out", ev.out, "Report directory")->required();
  eval_sub->add_option("--min-depth", ev.min_depth, "Validity floor in meters");
  eval_sub->add_option("--max-depth", ev.max_depth, "Validity cap in meters");
  eval_sub->add_flag("--oracle", ev.oracle, "Score the ground truth against itself");
  eval_sub->add_option("--error-maps", ev.error_maps, "Directory for per-image relative error images");

  InferArgs in;
  auto* infer_sub = app.add_subcommand("infer", "Predict metric depth for one image");
  infer_sub->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  infer_sub->add_option("--image", in.image, "Input RGB PNG")->required();
  infer_sub->add_option("--depth", in.depth_out, "Output 16-bit metric depth PNG")->required();
  infer_sub->add_option("--color", in.color_out, "Output relative depth colormap PNG");
  infer_sub->add_option("--ply", in.ply_out, "Output point cloud; needs intrinsics");
  infer_sub->add_option("--fx", in.fx, "Focal length x in pixels");
  infer_sub->add_option("--fy", in.fy, "Focal length y in pixels");
  infer_sub->add_option("--cx", in.cx, "Principal point x");
  infer_sub->add_option("--cy", in.cy, "Principal point y");
  infer_sub->add_option("--embeddings", in.embeddings, "Scene embedding table for the scene label");
  infer_sub->add_option("--depth-divisor", in.divisor, "Depth PNG units per meter")->capture_default_str();
  infer_sub->add_option("--meta", in.meta_out, "Output metadata JSON (default: <depth>.json)");

  ExportArgs ex;
  auto* export_sub = app.add_subcommand("export-embeddings", "Write a pseudo embedding table");
  export_sub->add_option("--out", ex.out, "Output table file")->required();
  export_sub->add_option("--names", ex.names, "Category names (default: the synthetic categories)")->delimiter(',');
  export_sub->add_option("--dim", ex.dim, "Embedding width")->capture_default_str();
  export_sub->add_option("--seed", ex.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "scaledepth: usage error: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) gen_data(gen);
    if (*train_sub) train_cmd(tr);
    if (*eval_sub) eval_cmd(ev);
    if (*infer_sub) infer_cmd(in);
    if (*export_sub) export_cmd(ex);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "scaledepth: usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scaledepth: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
