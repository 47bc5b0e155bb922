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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaledepth/losses.hpp"
#include "scaledepth/metrics.hpp"
#include "scaledepth/network.hpp"
#include "scaledepth/synth.hpp"

namespace sd::train {

enum class LrSchedule { Constant, Cosine };

struct OptimConfig {
  double lr = 1e-4;
  /// Cosine decays the LR from `lr` to 0 over the configured iterations.
  LrSchedule schedule = LrSchedule::Constant;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Multiplier on the encoder LR, applied only to a pretrained encoder.
  double encoder_lr_scale = 0.1;
};

struct TrainConfig {
  network::ModelConfig model;
  losses::LossConfig loss;
  OptimConfig optim;
  int iterations = 2000;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Square random crop side; 0 trains on full images.
  int crop_size = 0;
  /// Progress print interval of the command-line trainer.
  int log_every = 100;
  ValidityPolicy eval_policy{1e-3, 10.0};

  void validate() const;
  /// Sections [model], [loss], [optim], [train], [eval]. Unknown keys throw.
  static TrainConfig from_ini_text(const std::string& text);
  static TrainConfig from_ini(const std::filesystem::path& path);
  std::string to_ini() const;
  /// Base learning rate for the step taken at `iteration`.
  double lr_at(int iteration) const;
  /// SCALEDEPTH_SEED, when set, replaces `seed`.
  void apply_env();
};

class AdamW {
 public:
  explicit AdamW(const ParameterSet& params);
  void step(ParameterSet& params, const std::vector<Mat>& grads, const OptimConfig& cfg, bool pretrained_encoder);

  long long steps() const { return t_; }
  std::vector<Mat>& first_moment() { return m_; }
  std::vector<Mat>& second_moment() { return v_; }
  const std::vector<Mat>& first_moment() const { return m_; }
  const std::vector<Mat>& second_moment() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  std::vector<Mat> m_, v_;
  long long t_ = 0;
};

struct StepLog {
  int iteration = 0;
  double si = 0, ti = 0, total = 0;
};

/// Crops a sample to the given window.
synth::Sample crop(const synth::Sample& s, int y0, int x0, int height, int width);

class Trainer {
 public:
  /// `table`, when non-null, enables the text-image term and must outlive the trainer.
  Trainer(const TrainConfig& cfg, const sasp::SceneEmbeddingTable* table);

  network::Model& model() { return model_; }
  const network::Model& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int iteration() const { return iteration_; }
  const std::vector<StepLog>& log() const { return log_; }

  /// Loss of one sample; adds scale * d(total)/d(params) into `grads` when given.
  losses::LossBreakdown sample_loss(const synth::Sample& s, std::vector<Mat>* grads, double scale = 1.0) const;

  /// One optimizer step on the batch; the loss is the mean of per-image losses.
  StepLog step(std::span<const synth::Sample> batch);

  /// Runs until `config().iterations`, drawing batches deterministically from
  /// (seed, iteration). `on_step` is called after every step.
  void fit(const std::vector<synth::Sample>& data, const std::function<void(const StepLog&)>& on_step = {});

  void save(const std::filesystem::path& path) const;
  /// Restores parameters, optimizer state, iteration and the loss log.
  void resume(const std::filesystem::path& path);

 private:
  TrainConfig cfg_;
  const sasp::SceneEmbeddingTable* table_;
  network::Model model_;
  AdamW opt_;
  int iteration_ = 0;
  std::vector<StepLog> log_;
};

std::string format_log(std::span<const StepLog> log);

struct EvalResult {
  metrics::MetricReport mean;
  std::vector<metrics::MetricReport> per_image;
  std::vector<std::size_t> scored;   // input index of each per_image entry
  std::vector<std::size_t> skipped;  // inputs with no valid pixel under the policy
  double mean_scale = 0;
};

/// Scores model predictions. With `oracle` set, the prediction is the ground
/// truth itself, which checks the evaluation path end to end.
EvalResult evaluate(const network::Model& model, std::span<const synth::Sample> data, const ValidityPolicy& policy,
                    bool oracle = false);

}  // namespace sd::train
