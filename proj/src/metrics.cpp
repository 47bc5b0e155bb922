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

#include "scaledepth/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace sd::metrics {

namespace {

MetricReport evaluate_impl(const Mat& pred, const Mask* pred_valid, const DepthMap& gt, const ValidityPolicy& policy) {
  if (pred.rows() != gt.height() || pred.cols() != gt.width())
    throw std::invalid_argument("evaluate: prediction and ground truth shapes differ");
  DepthMap capped = apply_validity(gt, policy);

  MetricReport r;
  double sum_abs_rel = 0, sum_sq_rel = 0, sum_sq = 0, sum_sq_log = 0, sum_log10 = 0;
  std::vector<double> log_diffs;
  log_diffs.reserve(capped.valid_count());
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (Eigen::Index i = 0; i < capped.values().size(); ++i) {
    if (!capped.valid().data()[i] || (pred_valid && !pred_valid->data()[i])) continue;
    double g = capped.values().data()[i];
    double d = pred.data()[i];
    if (!std::isfinite(d)) throw std::invalid_argument("evaluate: non-finite prediction");
    if (!(d > 0.0)) {
      d = policy.min_depth;
      ++r.n_clamped;
    }
    double diff = d - g;
    double log_diff = std::log(d) - std::log(g);
    sum_abs_rel += std::abs(diff) / g;
    sum_sq_rel += diff * diff / g;
    sum_sq += diff * diff;
    sum_sq_log += log_diff * log_diff;
    sum_log10 += std::abs(std::log10(d) - std::log10(g));
    log_diffs.push_back(log_diff);
    // max(d/g, g/d) < t, phrased without the division.
    d1 += d < t1 * g && g < t1 * d;
    d2 += d < t2 * g && g < t2 * d;
    d3 += d < t3 * g && g < t3 * d;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("evaluate: no valid pixels after applying the validity policy");
  const double nn = static_cast<double>(n);
  r.n_valid = n;
  r.arel = sum_abs_rel / nn;
  r.srel = sum_sq_rel / nn;
  r.rmse = std::sqrt(sum_sq / nn);
  r.rmsl = std::sqrt(sum_sq_log / nn);
  r.log10 = sum_log10 / nn;
  double mean_log = 0;
  for (double v : log_diffs) mean_log += v;
  mean_log /= nn;
  double var_log = 0;
  for (double v : log_diffs) var_log += (v - mean_log) * (v - mean_log);
  r.silog = 100.0 * std::sqrt(var_log / nn);
  r.delta1 = d1 / nn;
  r.delta2 = d2 / nn;
  r.delta3 = d3 / nn;
  return r;
}

}  // namespace

MetricReport evaluate(const DepthMap& pred, const DepthMap& gt, const ValidityPolicy& policy) {
  return evaluate_impl(pred.values(), &pred.valid(), gt, policy);
}

MetricReport evaluate(const Mat& pred, const DepthMap& gt, const ValidityPolicy& policy) {
  return evaluate_impl(pred, nullptr, gt, policy);
}

MetricReport aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
  MetricReport out;
  for (const auto& r : reports) {
    out.arel += r.arel;
    out.srel += r.srel;
    out.rmse += r.rmse;
    out.rmsl += r.rmsl;
    out.log10 += r.log10;
    out.silog += r.silog;
    out.delta1 += r.delta1;
    out.delta2 += r.delta2;
    out.delta3 += r.delta3;
    out.n_valid += r.n_valid;
    out.n_clamped += r.n_clamped;
  }
  const double n = static_cast<double>(reports.size());
  out.arel /= n;
  out.srel /= n;
  out.rmse /= n;
  out.rmsl /= n;
  out.log10 /= n;
  out.silog /= n;
  out.delta1 /= n;
  out.delta2 /= n;
  out.delta3 /= n;
  return out;
}

std::string to_text(const MetricReport& r) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "arel " << r.arel << "\nsrel " << r.srel << "\nrmse " << r.rmse << "\nrmsl " << r.rmsl << "\nlog10 "
     << r.log10 << "\nsilog " << r.silog << "\ndelta1 " << r.delta1 << "\ndelta2 " << r.delta2 << "\ndelta3 "
     << r.delta3 << "\nn_valid " << r.n_valid << "\nn_clamped " << r.n_clamped << '\n';
  return os.str();
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j{{"arel", r.arel},     {"srel", r.srel},         {"rmse", r.rmse},
                           {"rmsl", r.rmsl},     {"log10", r.log10},       {"silog", r.silog},
                           {"delta1", r.delta1}, {"delta2", r.delta2},     {"delta3", r.delta3},
                           {"n_valid", r.n_valid}, {"n_clamped", r.n_clamped}};
  return j.dump(2);
}

}  // namespace sd::metrics
