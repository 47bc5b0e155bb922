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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scaledepth/arde.hpp"
#include "scaledepth/autograd.hpp"
#include "scaledepth/depth.hpp"
#include "scaledepth/sasp.hpp"

namespace sd::network {

inline constexpr int kLevels = 4;

struct ModelConfig {
  int width = 32;          // decoder width D
  int bins = 32;           // N
  int scale_queries = 8;   // M
  int heads = 4;           // K
  int blocks = 3;
  int layers_per_block = 3;
  int text_dim = 32;       // D_t
  int ffn_dim = 64;
  std::array<int, kLevels> encoder_widths{16, 32, 64, 128};
  double tau_init = 0.07;
  /// Initial bias of the log-scale head.
  double log_scale_init = 0.0;
  /// Encoder weights come from elsewhere; enables the reduced encoder LR.
  bool encoder_pretrained = false;

  int layers() const { return blocks * layers_per_block; }
  void validate() const;
  /// Stable "key = value" rendering; the checkpoint hash is taken over it.
  std::string canonical() const;
  std::uint64_t hash() const;
  /// Reads "key = value" lines (the canonical form or an INI section body);
  /// unknown keys are rejected, missing keys keep their defaults.
  static ModelConfig parse(const std::string& text);

  /// Small enough for exhaustive finite-difference checks.
  static ModelConfig tiny();
  /// The larger variant selectable from configuration.
  static ModelConfig large();
};

struct FeatureLevel {
  int height = 0;
  int width = 0;
  Var features;  // (height*width) x channels
};

/// Four levels at strides 4, 8, 16, 32 (index 0 is the finest).
struct FeaturePyramid {
  std::array<FeatureLevel, kLevels> levels;
};

struct DecoderOutput {
  std::vector<Var> bin_states;    // per layer, N x D
  std::vector<Var> scale_states;  // per layer, M x D
  /// masks[t] is the mask set consumed by layer t.
  std::vector<arde::AttentionMaskSet> masks;
  std::vector<int> layer_levels;  // pyramid level attended by each layer
  arde::BinHead::Output final_bins;
  Var final_logits;               // (H/4*W/4) x N
  int logits_height = 0, logits_width = 0;
};

struct ForwardOutput {
  int height = 0, width = 0;
  Var relative;         // (H*W) x 1
  Var relative_coarse;  // level-0 resolution
  Var log_scale;        // 1 x 1
  Var scale;            // 1 x 1
  Var metric;           // (H*W) x 1, exactly scale * relative
  Var scene_logits;     // 1 x C, undefined without an embedding table
  DecoderOutput decoder;
};

/// Value-level prediction for one image.
struct Prediction {
  DepthMap metric;
  DepthMap relative;
  sasp::ScaleFactor scale;
  std::optional<sasp::SceneLogits> scene;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  FeaturePyramid encode(Graph& g, const RgbImage& image) const;
  FeaturePyramid pixel_decode(Graph& g, const FeaturePyramid& raw) const;
  /// `frozen_masks`, when given, replaces the generated masks layer by layer
  /// (used to differentiate at a fixed mask pattern).
  DecoderOutput decode_queries(Graph& g, const FeaturePyramid& pyramid,
                               const std::vector<arde::AttentionMaskSet>* frozen_masks = nullptr) const;
  ForwardOutput forward(Graph& g, const RgbImage& image, const sasp::SceneEmbeddingTable* table,
                        const std::vector<arde::AttentionMaskSet>* frozen_masks = nullptr) const;

  Prediction predict(const RgbImage& image, const sasp::SceneEmbeddingTable* table = nullptr) const;

  double tau() const;

 private:
  void check_image(const RgbImage& image) const;
  std::string layer_prefix(int layer) const { return "decoder.layer" + std::to_string(layer); }

  ModelConfig cfg_;
  ParameterSet params_;
};

/// Reflect-pads to multiples of 32, predicts, and crops back.
Prediction predict_padded(const Model& model, const RgbImage& image, const sasp::SceneEmbeddingTable* table);
RgbImage reflect_pad(const RgbImage& image, int height, int width);

/// Pyramid level attended by decoder layer `layer`: 3, 2, 1, 3, 2, 1, ...
int attended_level(int layer);

/// Cross-attention allow mask laid out [head][query][key] for N bin queries
/// followed by M scale queries; scale-query rows are never blocked.
std::vector<std::uint8_t> cross_attention_allow(const arde::AttentionMaskSet& masks, int scale_queries);

/// Fixed 2-D sine positional encoding, (h*w) x width.
Mat sine_position_encoding(int height, int width, int channels);

}  // namespace sd::network
