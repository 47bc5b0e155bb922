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
#include <string>
#include <utility>
#include <vector>

#include "scaledepth/autograd.hpp"
#include "scaledepth/depth.hpp"
#include "scaledepth/nn.hpp"

/// Adaptive relative depth: per-image bins over the unit depth interval,
/// pixel-to-bin similarity, attention masks for the next decoder layer and
/// the bin-center weighted relative depth map.
namespace sd::arde {

/// Per-length floor applied after softplus.
inline constexpr double kLengthFloor = 1e-8;

/// Normalized bin lengths and their centers over (0, 1).
struct BinPartition {
  Vec lengths;
  Vec centers;

  /// Validates positivity and unit sum, then derives centers.
  static BinPartition from_lengths(Vec normalized);
  int size() const { return static_cast<int>(lengths.size()); }
};

/// theta_i = L_i / 2 + sum_{j<i} L_j.
Vec bin_centers(const Vec& lengths);
/// softplus, floor, then divide by the sum.
Vec normalize_lengths(const Vec& raw);

struct BinFeatures {
  Mat features;  // N x D
};

/// P[i, y, x], stored pixel-major as (H*W) x N so that row p holds the
/// logits of pixel p over all bins.
struct SimilarityVolume {
  int bins = 0, height = 0, width = 0;
  Mat logits;

  double at(int bin, int y, int x) const { return logits(static_cast<Eigen::Index>(y) * width + x, bin); }
};

/// B[bin, head, y, x]; nonzero means the bin query may attend to (y, x).
struct AttentionMaskSet {
  int bins = 0, heads = 0, height = 0, width = 0;
  std::vector<std::uint8_t> allow;

  static AttentionMaskSet all_allow(int bins, int heads, int height, int width);
  std::size_t offset(int bin, int head) const {
    return (static_cast<std::size_t>(bin) * heads + head) * height * width;
  }
  bool allowed(int bin, int head, int y, int x) const { return allow[offset(bin, head) + y * width + x] != 0; }
};

// ---- differentiable building blocks ----------------------------------------

Var normalize_lengths(Var raw);                             // N x 1 -> N x 1
Var centers_from_lengths(Var lengths);                      // N x 1 -> N x 1
Var similarity_logits(Var image_features, Var bin_features);  // (HW x D), (N x D) -> HW x N
Var relative_depth(Var centers, Var logits);                // (N x 1), (HW x N) -> HW x 1

/// The two independent heads applied to updated bin queries: one for raw
/// lengths (D -> D -> 1), one for bin features (D -> D -> D).
struct BinHead {
  struct Output {
    Var raw_lengths;
    Var lengths;
    Var centers;
    Var features;
  };
  static void add_parameters(ParameterSet& ps, const std::string& prefix, int width, nn::Rng& rng);
  static Output forward(Graph& g, const ParameterSet& ps, const std::string& prefix, Var bin_queries);
};

// ---- value-level operations -------------------------------------------------

std::pair<BinPartition, BinFeatures> predict_bins(const ParameterSet& ps, const std::string& prefix,
                                                  const Mat& bin_queries);
SimilarityVolume compute_similarity(const BinFeatures& bins, const Mat& image_features, int height, int width);
/// sigmoid -> bilinear resize -> repeat over heads -> threshold at 0.5
/// (inclusive); a bin whose mask would block everything allows everything.
AttentionMaskSet generate_masks(const SimilarityVolume& sim, int target_height, int target_width, int heads);
DepthMap relative_depth(const BinPartition& bins, const SimilarityVolume& sim);

}  // namespace sd::arde
