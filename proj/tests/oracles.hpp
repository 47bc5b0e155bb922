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

// Independent reference computations used by the tests. Everything here is
// written as plain scalar loops over std::vector so it shares no code path
// with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "scaledepth/autograd.hpp"
#include "scaledepth/depth.hpp"

namespace oracle {

inline std::vector<double> prefix_centers(const std::vector<double>& lengths) {
  std::vector<double> out(lengths.size());
  double acc = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    out[i] = acc + 0.5 * lengths[i];
    acc += lengths[i];
  }
  return out;
}

struct Metrics {
  double arel = 0, srel = 0, rmse = 0, rmsl = 0, log10 = 0, silog = 0, d1 = 0, d2 = 0, d3 = 0;
  int n = 0;
};

// pred/gt as flat vectors; `use` marks scored pixels.
inline Metrics metrics(const std::vector<double>& pred, const std::vector<double>& gt, const std::vector<bool>& use) {
  Metrics m;
  std::vector<double> r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!use[i]) continue;
    const double d = pred[i], g = gt[i];
    m.arel += std::fabs(d - g) / g;
    m.srel += (d - g) * (d - g) / g;
    m.rmse += (d - g) * (d - g);
    const double l = std::log(d) - std::log(g);
    m.rmsl += l * l;
    m.log10 += std::fabs(std::log10(d) - std::log10(g));
    r.push_back(l);
    const double ratio = std::max(d / g, g / d);
    m.d1 += ratio < 1.25;
    m.d2 += ratio < 1.25 * 1.25;
    m.d3 += ratio < 1.25 * 1.25 * 1.25;
    ++m.n;
  }
  const double n = m.n;
  m.arel /= n;
  m.srel /= n;
  m.rmse = std::sqrt(m.rmse / n);
  m.rmsl = std::sqrt(m.rmsl / n);
  m.log10 /= n;
  double mu = 0;
  for (double v : r) mu += v;
  mu /= n;
  double var = 0;
  for (double v : r) var += (v - mu) * (v - mu);
  m.silog = 100.0 * std::sqrt(var / n);
  m.d1 /= n;
  m.d2 /= n;
  m.d3 /= n;
  return m;
}

inline double si_loss(const std::vector<double>& rel, const std::vector<double>& met, const std::vector<double>& gt,
                      const std::vector<bool>& use, double alpha, double lambda) {
  std::vector<double> delta, eps;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!use[i]) continue;
    delta.push_back(std::log(gt[i]) - std::log(rel[i]));
    eps.push_back(std::log(gt[i]) - std::log(met[i]));
  }
  const double n = static_cast<double>(delta.size());
  double md = 0, me = 0;
  for (double v : delta) md += v;
  for (double v : eps) me += v;
  md /= n;
  me /= n;
  double var = 0;
  for (double v : delta) var += (v - md) * (v - md);
  var /= n;
  return alpha * std::sqrt(var + lambda * me * me);
}

// Relative error with a floor on the denominator; see the gradient-check notes.
inline double rel_err(double a, double b, double floor) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Max relative error between reverse-mode gradients and central differences
// of `f` at `inputs`.
inline double grad_check(const std::function<sd::Var(sd::Graph&, const std::vector<sd::Var>&)>& f,
                         std::vector<sd::Mat> inputs, double h = 1e-6, double floor = 1e-7) {
  std::vector<sd::Mat> analytic;
  {
    sd::Graph g;
    std::vector<sd::Var> leaves;
    for (const auto& m : inputs) leaves.push_back(g.leaf(m));
    sd::Var out = f(g, leaves);
    g.backward(out);
    for (const auto& l : leaves) analytic.push_back(l.grad());
  }
  auto eval = [&] {
    sd::Graph g;
    std::vector<sd::Var> leaves;
    for (const auto& m : inputs) leaves.push_back(g.constant(m));
    return f(g, leaves).item();
  };
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      double& x = inputs[k].data()[i];
      const double x0 = x;
      const double step = h * std::max(1.0, std::fabs(x0));
      x = x0 + step;
      const double up = eval();
      x = x0 - step;
      const double down = eval();
      x = x0;
      worst = std::max(worst, rel_err(analytic[k].data()[i], (up - down) / (2 * step), floor));
    }
  return worst;
}

inline sd::Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  sd::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace oracle
