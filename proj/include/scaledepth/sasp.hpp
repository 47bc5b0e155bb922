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

#include <filesystem>
#include <string>
#include <vector>

#include "scaledepth/autograd.hpp"
#include "scaledepth/depth.hpp"

/// Semantic-aware scale prediction: pooling of the scale queries, their
/// temperature-scaled cosine similarity to per-category text embeddings, the
/// positive scene scale, and metric synthesis from scale and relative depth.
namespace sd::sasp {

enum class EmbeddingSource { Pseudo, File };

/// One embedding row per scene category.
struct SceneEmbeddingTable {
  std::vector<std::string> names;
  Mat embeddings;  // C x D_t
  EmbeddingSource source = EmbeddingSource::Pseudo;

  void validate() const;
  int size() const { return static_cast<int>(names.size()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
  int index_of(const std::string& name) const;
};

/// Text format: a header line "C D_t" (or "C T D_t" for T per-template rows
/// per category, averaged then unit-normalized), C*T rows of D_t numbers,
/// then C category names, one per line.
SceneEmbeddingTable load_embedding_table(const std::filesystem::path& path);
void save_embedding_table(const SceneEmbeddingTable& table, const std::filesystem::path& path);
/// Mean over templates per category followed by unit normalization.
/// `per_template` holds C*T rows, category-major.
Mat average_templates(const Mat& per_template, int categories, int templates);

struct SceneLogits {
  Vec probs;
  double tau = 0.07;
  int argmax() const;
};

struct ScaleFactor {
  double value = 1.0;
};

// ---- differentiable building blocks ----------------------------------------

/// Concatenate M x D queries into 1 x (M*D) and project to 1 x D_t.
Var pool_scale_queries(Var scale_queries, Var weight, Var bias);
/// 1 x C logits cos(F_t^i, F_c) / tau; `log_tau` is 1 x 1.
Var similarity_logits(Var pooled, Var table, Var log_tau);
Var synthesize_metric(Var scale, Var relative);

// ---- value-level operations -------------------------------------------------

Vec pool_scale_queries(const Mat& scale_queries, const Mat& weight, const Vec& bias);
SceneLogits text_image_similarity(const Vec& pooled, const SceneEmbeddingTable& table, double tau);
/// S = exp(head output).
ScaleFactor scale_from_log(double head_output);
DepthMap synthesize_metric(ScaleFactor scale, const DepthMap& relative);

}  // namespace sd::sasp
