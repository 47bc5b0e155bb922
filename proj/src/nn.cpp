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

#include "scaledepth/nn.hpp"

#include <cmath>

namespace sd::nn {

Mat uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Mat normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void add_linear(ParameterSet& ps, const std::string& prefix, int in, int out, Rng& rng, bool encoder) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  ps.add(prefix + ".weight", uniform(rng, in, out, bound), encoder);
  ps.add(prefix + ".bias", uniform(rng, 1, out, bound), encoder);
}

Var linear(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x) {
  return add(matmul(x, g.param(ps, prefix + ".weight")), g.param(ps, prefix + ".bias"));
}

void add_mlp(ParameterSet& ps, const std::string& prefix, int in, int hidden, int out, Rng& rng) {
  add_linear(ps, prefix + ".fc1", in, hidden, rng);
  add_linear(ps, prefix + ".fc2", hidden, out, rng);
}

Var mlp(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x) {
  return linear(g, ps, prefix + ".fc2", gelu(linear(g, ps, prefix + ".fc1", x)));
}

void add_layer_norm(ParameterSet& ps, const std::string& prefix, int width, bool encoder) {
  ps.add(prefix + ".gamma", Mat::Ones(1, width), encoder);
  ps.add(prefix + ".beta", Mat::Zero(1, width), encoder);
}

Var layer_norm(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x) {
  return layer_norm_rows(x, g.param(ps, prefix + ".gamma"), g.param(ps, prefix + ".beta"));
}

void add_conv(ParameterSet& ps, const std::string& prefix, int in, int out, int kernel, Rng& rng, bool encoder) {
  add_linear(ps, prefix, kernel * kernel * in, out, rng, encoder);
}

Var conv2d(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x, int height, int width, int kernel,
           int stride, int pad) {
  Var cols = (kernel == 1 && stride == 1 && pad == 0) ? x : im2col(x, height, width, kernel, stride, pad);
  return linear(g, ps, prefix, cols);
}

}  // namespace sd::nn
