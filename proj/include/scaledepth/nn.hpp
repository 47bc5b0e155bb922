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

#include <random>
#include <string>

#include "scaledepth/autograd.hpp"

// Parameterized building blocks. Parameters live in a ParameterSet under
// "<prefix>.weight" / "<prefix>.bias" style names; the forward helpers look
// them up by the same prefix.
namespace sd::nn {

using Rng = std::mt19937_64;

Mat uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound);
Mat normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

/// weight: in x out, bias: 1 x out, both U(-1/sqrt(in), 1/sqrt(in)).
void add_linear(ParameterSet& ps, const std::string& prefix, int in, int out, Rng& rng, bool encoder = false);
Var linear(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x);

/// Two-layer perceptron with a GELU between: prefix.fc1, prefix.fc2.
void add_mlp(ParameterSet& ps, const std::string& prefix, int in, int hidden, int out, Rng& rng);
Var mlp(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x);

void add_layer_norm(ParameterSet& ps, const std::string& prefix, int width, bool encoder = false);
Var layer_norm(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x);

/// Square convolution on a channels-last map; weight is (k*k*in) x out.
void add_conv(ParameterSet& ps, const std::string& prefix, int in, int out, int kernel, Rng& rng,
              bool encoder = false);
Var conv2d(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x, int height, int width, int kernel,
           int stride, int pad);

}  // namespace sd::nn
