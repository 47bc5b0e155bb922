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

#include "scaledepth/arde.hpp"

#include <cmath>
#include <stdexcept>

namespace sd::arde {

Vec bin_centers(const Vec& lengths) {
  Vec centers(lengths.size());
  double prefix = 0.0;
  for (Eigen::Index i = 0; i < lengths.size(); ++i) {
    centers(i) = 0.5 * lengths(i) + prefix;
    prefix += lengths(i);
  }
  return centers;
}

namespace {
double softplus_floor(double x) { return (x > 30.0 ? x : std::log1p(std::exp(x))) + kLengthFloor; }
}  // namespace

Vec normalize_lengths(const Vec& raw) {
  Vec l = raw.unaryExpr([](double x) { return softplus_floor(x); });
  return l / l.sum();
}

BinPartition BinPartition::from_lengths(Vec normalized) {
  if (normalized.size() == 0) throw std::invalid_argument("BinPartition: no bins");
  if ((normalized.array() <= 0.0).any()) throw std::invalid_argument("BinPartition: lengths must be positive");
  if (std::abs(normalized.sum() - 1.0) > 1e-6) throw std::invalid_argument("BinPartition: lengths must sum to 1");
  Vec centers = bin_centers(normalized);
  return BinPartition{std::move(normalized), std::move(centers)};
}

AttentionMaskSet AttentionMaskSet::all_allow(int bins, int heads, int height, int width) {
  return AttentionMaskSet{bins, heads, height, width,
                          std::vector<std::uint8_t>(static_cast<std::size_t>(bins) * heads * height * width, 1)};
}

// ---- differentiable ---------------------------------------------------------

Var normalize_lengths(Var raw) {
  Var l = add_scalar(softplus(raw), kLengthFloor);
  return div(l, sum(l));
}

Var centers_from_lengths(Var lengths) {
  if (lengths.cols() != 1) throw std::invalid_argument("centers_from_lengths: expected N x 1");
  Mat centers = bin_centers(Vec(lengths.value().col(0)));
  return lengths.graph().record(std::move(centers), {lengths}, [lengths](Graph& g, const Mat& gr, const Mat&) {
    // d theta_i / d L_j = 1 for j < i, 1/2 for j = i.
    Mat gl(gr.rows(), 1);
    double suffix = 0.0;
    for (Eigen::Index j = gr.rows() - 1; j >= 0; --j) {
      gl(j, 0) = 0.5 * gr(j, 0) + suffix;
      suffix += gr(j, 0);
    }
    g.accumulate(lengths, gl);
  });
}

Var similarity_logits(Var image_features, Var bin_features) {
  if (image_features.cols() != bin_features.cols())
    throw std::invalid_argument("similarity: feature width mismatch");
  return matmul_nt(image_features, bin_features);
}

Var relative_depth(Var centers, Var logits) {
  if (centers.rows() != logits.cols()) throw std::invalid_argument("relative_depth: bin count mismatch");
  return matmul(softmax_rows(logits), centers);
}

void BinHead::add_parameters(ParameterSet& ps, const std::string& prefix, int width, nn::Rng& rng) {
  nn::add_mlp(ps, prefix + ".length", width, width, 1, rng);
  nn::add_mlp(ps, prefix + ".feature", width, width, width, rng);
}

BinHead::Output BinHead::forward(Graph& g, const ParameterSet& ps, const std::string& prefix, Var bin_queries) {
  Output out;
  out.raw_lengths = nn::mlp(g, ps, prefix + ".length", bin_queries);
  out.lengths = normalize_lengths(out.raw_lengths);
  out.centers = centers_from_lengths(out.lengths);
  out.features = nn::mlp(g, ps, prefix + ".feature", bin_queries);
  return out;
}

// ---- value level ------------------------------------------------------------

std::pair<BinPartition, BinFeatures> predict_bins(const ParameterSet& ps, const std::string& prefix,
                                                  const Mat& bin_queries) {
  if (!bin_queries.allFinite()) throw std::invalid_argument("predict_bins: non-finite bin queries");
  Graph g;
  auto out = BinHead::forward(g, ps, prefix, g.constant(bin_queries));
  BinPartition part{Vec(out.lengths.value().col(0)), Vec(out.centers.value().col(0))};
  return {std::move(part), BinFeatures{out.features.value()}};
}

SimilarityVolume compute_similarity(const BinFeatures& bins, const Mat& image_features, int height, int width) {
  if (image_features.rows() != static_cast<Eigen::Index>(height) * width)
    throw std::invalid_argument("compute_similarity: feature rows do not match height*width");
  if (image_features.cols() != bins.features.cols())
    throw std::invalid_argument("compute_similarity: feature width mismatch");
  return SimilarityVolume{static_cast<int>(bins.features.rows()), height, width,
                          image_features * bins.features.transpose()};
}

AttentionMaskSet generate_masks(const SimilarityVolume& sim, int target_height, int target_width, int heads) {
  if (target_height <= 0 || target_width <= 0 || heads <= 0)
    throw std::invalid_argument("generate_masks: bad target size or head count");
  Mat prob = sim.logits.unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  // A trailing ones column resizes to the per-pixel weight sum; comparing
  // against half of it keeps a constant 0.5 plane exactly on the threshold.
  Mat with_ones(prob.rows(), prob.cols() + 1);
  with_ones << prob, Mat::Ones(prob.rows(), 1);
  Mat resized = (sim.height == target_height && sim.width == target_width)
                    ? with_ones
                    : apply_resize(make_resize_table(sim.height, sim.width, target_height, target_width), with_ones);
  const Eigen::Index ones = prob.cols();
  AttentionMaskSet masks{sim.bins, heads, target_height, target_width, {}};
  const std::size_t plane = static_cast<std::size_t>(target_height) * target_width;
  masks.allow.assign(static_cast<std::size_t>(sim.bins) * heads * plane, 0);
  std::vector<std::uint8_t> one(plane);
  for (int b = 0; b < sim.bins; ++b) {
    bool any = false;
    for (std::size_t p = 0; p < plane; ++p) {
      one[p] = resized(static_cast<Eigen::Index>(p), b) >= 0.5 * resized(static_cast<Eigen::Index>(p), ones);
      any = any || one[p];
    }
    if (!any) std::fill(one.begin(), one.end(), 1);
    for (int h = 0; h < heads; ++h) std::copy(one.begin(), one.end(), masks.allow.begin() + masks.offset(b, h));
  }
  return masks;
}

DepthMap relative_depth(const BinPartition& bins, const SimilarityVolume& sim) {
  if (bins.size() != sim.bins || sim.logits.cols() != sim.bins)
    throw std::invalid_argument("relative_depth: bin count mismatch");
  Graph g;
  Var r = relative_depth(g.constant(bins.centers), g.constant(sim.logits));
  Mat values = Eigen::Map<const Mat>(r.value().data(), sim.height, sim.width);
  return DepthMap::dense(std::move(values), DepthKind::Relative);
}

}  // namespace sd::arde
