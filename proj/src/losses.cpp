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

#include "scaledepth/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sd::losses {

namespace {

constexpr double kLogEps = 1e-6;
constexpr double kUnderflow = 1e-300;

// Valid-pixel values of a prediction, lifted off zero only on underflow.
Var valid_log(Var pred, const std::vector<int>& idx) {
  Var picked = gather_elements(pred, idx);
  const Mat& v = picked.value();
  if ((v.array() < 0.0).any() || !v.allFinite())
    throw std::domain_error("si_loss: non-positive depth on a valid pixel");
  if ((v.array() < kUnderflow).any()) {
    Mat bump = (v.array() < kUnderflow).cast<double>() * kLogEps;
    picked = add(picked, picked.graph().constant(std::move(bump)));
  }
  return log(picked);
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("LossConfig: alpha must be positive");
  if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("LossConfig: lambda must lie in [0, 1]");
  if (!(beta >= 0)) throw std::invalid_argument("LossConfig: beta must be non-negative");
}

Var si_loss(Var relative, Var metric, const DepthMap& gt, const LossConfig& cfg) {
  const Eigen::Index n_pix = static_cast<Eigen::Index>(gt.height()) * gt.width();
  if (relative.value().size() != n_pix || metric.value().size() != n_pix)
    throw std::invalid_argument("si_loss: prediction size differs from ground truth");
  std::vector<int> idx = gt.valid_indices();
  if (idx.size() < 2) throw std::invalid_argument("si_loss: fewer than 2 valid pixels");
  Graph& g = relative.graph();
  Mat log_gt(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) log_gt(static_cast<Eigen::Index>(i), 0) = std::log(gt.values().data()[idx[i]]);
  Var lg = g.constant(std::move(log_gt));
  Var delta = sub(lg, valid_log(relative, idx));
  Var eps = sub(lg, valid_log(metric, idx));
  Var centered = sub(delta, mean(delta));
  Var variance = mean(square(centered));
  Var inner = add(variance, scale(square(mean(eps)), cfg.lambda));
  return scale(sqrt(inner), cfg.alpha);
}

double si_loss(const DepthMap& relative, const DepthMap& metric, const DepthMap& gt, const LossConfig& cfg) {
  if (relative.height() != gt.height() || relative.width() != gt.width() || metric.height() != gt.height() ||
      metric.width() != gt.width())
    throw std::invalid_argument("si_loss: map shapes differ");
  Graph g;
  return si_loss(g.constant(relative.values()), g.constant(metric.values()), gt, cfg).item();
}

Var ti_loss(Var logits, int label) {
  if (logits.rows() != 1) throw std::invalid_argument("ti_loss: expected 1 x C logits");
  if (label < 0 || label >= logits.cols()) throw std::out_of_range("ti_loss: label out of range");
  return scale(slice_cols(log_softmax_rows(logits), label, 1), -1.0);
}

double ti_loss(const sasp::SceneLogits& t, int label) {
  if (label < 0 || label >= t.probs.size()) throw std::out_of_range("ti_loss: label out of range");
  return -std::log(t.probs(label));
}

LossBreakdown total_loss(double si, std::optional<double> ti, const LossConfig& cfg, std::size_t valid_pixels) {
  if (!std::isfinite(si) || (ti && !std::isfinite(*ti))) throw std::domain_error("total_loss: non-finite component");
  LossBreakdown b;
  b.si = si;
  b.ti = ti.value_or(0.0);
  b.total = ti ? si + cfg.beta * *ti : si;
  b.valid_pixel_count = valid_pixels;
  return b;
}

}  // namespace sd::losses
