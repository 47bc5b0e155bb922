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
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace sd {

/// Row-major dense matrix. Feature maps are stored channels-last as
/// (H*W) x C with row index y*W + x.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Mat value;
  bool encoder = false;
};

/// Ordered, name-addressable parameter store. Iteration order is insertion
/// order, which fixes the checkpoint layout and the optimizer state layout.
class ParameterSet {
 public:
  Parameter& add(std::string name, Mat init, bool encoder = false);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const Parameter& p) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Zero-filled gradient buffers shaped like each parameter.
  std::vector<Mat> zeros_like() const;

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, int> index_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const { return value()(0, 0); }
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool defined() const { return graph_ != nullptr; }
  bool requires_grad() const;
  /// Gradient accumulated by the last backward pass (zeros if untouched).
  Mat grad() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. One graph per forward pass; nodes are recorded in
/// topological order so backward is a single reverse sweep.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Mat& out_grad, const Mat& out_value)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat value);
  /// Leaf that receives a gradient (used by gradient checks on inputs).
  Var leaf(Mat value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(const Parameter& p, int index);
  Var param(const ParameterSet& set, const std::string& name);
  /// Same value, cut from the tape.
  Var detach(Var v);

  Var record(Mat value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Mat value, std::span<const Var> parents, BackwardFn fn);

  void backward(Var root);

  const Mat& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  Mat& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }
  void accumulate(Var v, const Mat& g);

  /// Adds parameter gradients into `out`, which must be shaped like the
  /// ParameterSet the graph's param() calls referenced.
  void accumulate_param_grads(std::vector<Mat>& out) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;  // param index -> node id
  std::vector<std::pair<int, int>> param_order_;
};

// ---- differentiable operations -------------------------------------------
//
// Binary elementwise ops broadcast the second operand when it is 1x1, 1xC or
// Rx1; a broadcastable first operand is handled by symmetry.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator-(Var a);

Var matmul(Var a, Var b);     // a b
Var matmul_nt(Var a, Var b);  // a b^T

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var gelu(Var a);
Var softplus(Var a);
Var sigmoid(Var a);

Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);  // column sums, 1xC

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
Var l2_normalize_rows(Var a);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var transpose(Var a);
/// Flat element gather in row-major order; result is idx.size() x 1.
Var gather_elements(Var a, std::span<const int> idx);

/// im2col for a channels-last (H*W)xC map: output row per output pixel, one
/// C-wide block per kernel tap (ky, kx) in row-major order. Zero padding.
Var im2col(Var a, int height, int width, int kernel, int stride, int pad);

/// Bilinear resize of a channels-last map, half-pixel centers, no corner
/// alignment (the common deep-learning convention).
Var resize_bilinear(Var a, int height, int width, int out_height, int out_width);

/// Multi-head scaled dot-product attention. q: nq x D, k and v: nk x D.
/// `allow` is empty (no masking) or heads*nq*nk bytes, nonzero = may attend.
/// Rows with nothing allowed must not occur; callers enforce the fallback.
Var attention(Var q, Var k, Var v, int heads, std::span<const std::uint8_t> allow = {});

// ---- value-level helpers shared by ops and callers ------------------------

/// Sparse bilinear resampling table: for each output pixel, up to four
/// (input index, weight) taps.
struct ResizeTable {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  std::vector<int> index;      // out_pixels * 4
  std::vector<double> weight;  // out_pixels * 4
};
ResizeTable make_resize_table(int height, int width, int out_height, int out_width);
Mat apply_resize(const ResizeTable& t, const Mat& in);

double gelu_value(double x);

}  // namespace sd
