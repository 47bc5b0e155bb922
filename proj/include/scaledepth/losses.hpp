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

#include <cstddef>
#include <optional>

#include "scaledepth/autograd.hpp"
#include "scaledepth/depth.hpp"
#include "scaledepth/sasp.hpp"

namespace sd::losses {

struct LossConfig {
  double alpha = 10.0;
  double lambda = 0.15;
  double beta = 0.01;
  void validate() const;
};

struct LossBreakdown {
  double si = 0;
  double ti = 0;
  double total = 0;
  std::size_t valid_pixel_count = 0;
};

/// alpha * sqrt(Var[log gt - log R] + lambda * Mean[log gt - log M]^2) over
/// the valid pixels of `gt`; the variance is the population variance.
/// `relative` and `metric` are (H*W) x 1 in the ground truth's pixel order.
Var si_loss(Var relative, Var metric, const DepthMap& gt, const LossConfig& cfg);
double si_loss(const DepthMap& relative, const DepthMap& metric, const DepthMap& gt, const LossConfig& cfg);

/// -log T_label from 1 x C similarity logits.
Var ti_loss(Var logits, int label);
double ti_loss(const sasp::SceneLogits& t, int label);

/// total = si + beta * ti; an absent ti contributes nothing.
LossBreakdown total_loss(double si, std::optional<double> ti, const LossConfig& cfg, std::size_t valid_pixels);

}  // namespace sd::losses
