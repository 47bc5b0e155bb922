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
#include <span>
#include <string>

#include "scaledepth/depth.hpp"

namespace sd::metrics {

struct MetricReport {
  double arel = 0, srel = 0, rmse = 0, rmsl = 0, log10 = 0, silog = 0;
  double delta1 = 0, delta2 = 0, delta3 = 0;
  std::size_t n_valid = 0;
  /// Valid pixels whose prediction was non-positive and got clamped.
  std::size_t n_clamped = 0;
};

/// Scores pixels valid in both maps after applying `policy` to the ground
/// truth. delta_k counts max(d/g, g/d) < 1.25^k (strict); silog is
/// 100 * sqrt(population variance of log d - log g).
MetricReport evaluate(const DepthMap& pred, const DepthMap& gt, const ValidityPolicy& policy);
/// Raw prediction values, all treated as valid; non-positive ones are clamped
/// to policy.min_depth and counted.
MetricReport evaluate(const Mat& pred, const DepthMap& gt, const ValidityPolicy& policy);

/// Per-image mean of every metric; n_valid and n_clamped are summed.
MetricReport aggregate(std::span<const MetricReport> reports);

/// One "name value" pair per line.
std::string to_text(const MetricReport& r);
std::string to_json(const MetricReport& r);

}  // namespace sd::metrics
