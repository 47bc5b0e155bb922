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

#include "scaledepth/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sd {

// ---- ParameterSet -----------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Mat init, bool encoder) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  index_.emplace(name, static_cast<int>(params_.size()));
  params_.push_back(Parameter{std::move(name), std::move(init), encoder});
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

int ParameterSet::index_of(const Parameter& p) const { return index_.at(p.name); }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Mat> ParameterSet::zeros_like() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return out;
}

// ---- Var / Graph ------------------------------------------------------------

const Mat& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }
Mat Var::grad() const {
  if (graph_->has_grad(id_)) return graph_->grad(id_);
  return Mat::Zero(rows(), cols());
}

const Mat& Graph::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Mat& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Mat& v = value(id);
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::accumulate(Var v, const Mat& g) {
  if (!nodes_[v.id_].requires_grad) return;
  Mat& dst = grad(v.id_);
  if (dst.rows() != g.rows() || dst.cols() != g.cols())
    throw std::logic_error("gradient shape mismatch");
  dst += g;
}

Var Graph::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::leaf(Mat value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(const Parameter& p, int index) {
  auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{{}, &p.value, {}, {}, true});
  int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(index, id);
  param_order_.emplace_back(index, id);
  return Var(this, id);
}

Var Graph::param(const ParameterSet& set, const std::string& name) {
  const Parameter& p = set.at(name);
  return param(p, set.index_of(p));
}

Var Graph::detach(Var v) {
  if (!v.requires_grad()) return v;
  return constant(v.value());
}

Var Graph::record(Mat value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::record(Mat value, std::span<const Var> parents, BackwardFn fn) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.graph_ != this) throw std::logic_error("operand from another graph");
    rg = rg || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), nullptr, {}, rg ? std::move(fn) : BackwardFn{}, rg});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward needs a scalar root");
  if (!root.requires_grad()) return;
  grad(root.id_).setConstant(1.0);
  for (int id = root.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad, n.external ? *n.external : n.value);
  }
}

void Graph::accumulate_param_grads(std::vector<Mat>& out) const {
  for (auto [index, id] : param_order_) {
    const Node& n = nodes_[id];
    if (n.grad.size() > 0) out[index] += n.grad;
  }
}

// ---- broadcasting helpers ---------------------------------------------------

namespace {

enum class Bcast { Same, Row, Col, Scalar };

bool broadcastable(const Mat& big, const Mat& small) {
  if (big.rows() == small.rows() && big.cols() == small.cols()) return true;
  if (small.rows() == 1 && small.cols() == 1) return true;
  if (small.rows() == 1 && small.cols() == big.cols()) return true;
  if (small.cols() == 1 && small.rows() == big.rows()) return true;
  return false;
}

Bcast classify(const Mat& a, const Mat& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::Col;
  throw std::invalid_argument("shapes not broadcastable: " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
}

Mat expand(const Mat& b, Bcast kind, Eigen::Index rows, Eigen::Index cols) {
  switch (kind) {
    case Bcast::Same: return b;
    case Bcast::Scalar: return Mat::Constant(rows, cols, b(0, 0));
    case Bcast::Row: return b.replicate(rows, 1);
    case Bcast::Col: return b.replicate(1, cols);
  }
  return b;
}

Mat reduce_to(const Mat& g, Bcast kind) {
  switch (kind) {
    case Bcast::Same: return g;
    case Bcast::Scalar: return Mat::Constant(1, 1, g.sum());
    case Bcast::Row: return g.colwise().sum();
    case Bcast::Col: return g.rowwise().sum();
  }
  return g;
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  if (!broadcastable(a.value(), b.value()) && broadcastable(b.value(), a.value())) std::swap(a, b);
  Bcast kind = classify(a.value(), b.value());
  Mat out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return a.graph().record(std::move(out), {a, b}, [a, b, kind](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr);
    if (b.requires_grad()) g.accumulate(b, reduce_to(gr, kind));
  });
}

Var sub(Var a, Var b) {
  if (!broadcastable(a.value(), b.value()) && broadcastable(b.value(), a.value()))
    return add(scale(b, -1.0), a);
  Bcast kind = classify(a.value(), b.value());
  Mat out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return a.graph().record(std::move(out), {a, b}, [a, b, kind](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr);
    if (b.requires_grad()) g.accumulate(b, reduce_to(-gr, kind));
  });
}

Var mul(Var a, Var b) {
  if (!broadcastable(a.value(), b.value()) && broadcastable(b.value(), a.value())) std::swap(a, b);
  Bcast kind = classify(a.value(), b.value());
  Mat out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
  return a.graph().record(std::move(out), {a, b}, [a, b, kind](Graph& g, const Mat& gr, const Mat&) {
    if (a.requires_grad()) g.accumulate(a, gr.cwiseProduct(expand(b.value(), kind, a.rows(), a.cols())));
    if (b.requires_grad()) g.accumulate(b, reduce_to(gr.cwiseProduct(a.value()), kind));
  });
}

Var div(Var a, Var b) {
  Bcast kind = classify(a.value(), b.value());
  Mat bb = expand(b.value(), kind, a.rows(), a.cols());
  Mat out = a.value().cwiseQuotient(bb);
  return a.graph().record(std::move(out), {a, b}, [a, b, kind](Graph& g, const Mat& gr, const Mat& y) {
    Mat bb = expand(b.value(), kind, a.rows(), a.cols());
    if (a.requires_grad()) g.accumulate(a, gr.cwiseQuotient(bb));
    if (b.requires_grad()) g.accumulate(b, reduce_to(-gr.cwiseProduct(y).cwiseQuotient(bb), kind));
  });
}

Var scale(Var a, double s) {
  return a.graph().record(a.value() * s, {a}, [a, s](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr * s);
  });
}

Var add_scalar(Var a, double s) {
  Mat out = a.value().array() + s;
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) { g.accumulate(a, gr); });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator*(Var a, double s) { return scale(a, s); }
Var operator*(double s, Var a) { return scale(a, s); }
Var operator-(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Mat out = a.value() * b.value();
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Mat& gr, const Mat&) {
    if (a.requires_grad()) g.accumulate(a, gr * b.value().transpose());
    if (b.requires_grad()) g.accumulate(b, a.value().transpose() * gr);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Mat out = a.value() * b.value().transpose();
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Mat& gr, const Mat&) {
    if (a.requires_grad()) g.accumulate(a, gr * b.value());
    if (b.requires_grad()) g.accumulate(b, gr.transpose() * a.value());
  });
}

Var exp(Var a) {
  Mat out = a.value().array().exp();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat& y) {
    g.accumulate(a, gr.cwiseProduct(y));
  });
}

Var log(Var a) {
  Mat out = a.value().array().log();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr.cwiseQuotient(a.value()));
  });
}

Var sqrt(Var a) {
  Mat out = a.value().array().sqrt();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat& y) {
    g.accumulate(a, (gr.array() * 0.5 / y.array()).matrix());
  });
}

Var square(Var a) {
  Mat out = a.value().array().square();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, (2.0 * gr.array() * a.value().array()).matrix());
  });
}

Var gelu(Var a) {
  Mat out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    Mat d = a.value().unaryExpr([](double x) {
      double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + x * pdf;
    });
    g.accumulate(a, gr.cwiseProduct(d));
  });
}

Var softplus(Var a) {
  Mat out = a.value().unaryExpr([](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); });
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr.cwiseProduct(a.value().unaryExpr([](double x) { return sigmoid_value(x); })));
  });
}

Var sigmoid(Var a) {
  Mat out = a.value().unaryExpr([](double x) { return sigmoid_value(x); });
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat& y) {
    g.accumulate(a, (gr.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

// ---- reductions -------------------------------------------------------------

Var sum(Var a) {
  return a.graph().record(Mat::Constant(1, 1, a.value().sum()), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, Mat::Constant(a.rows(), a.cols(), gr(0, 0)));
  });
}

Var mean(Var a) {
  double n = static_cast<double>(a.value().size());
  return a.graph().record(Mat::Constant(1, 1, a.value().sum() / n), {a},
                          [a, n](Graph& g, const Mat& gr, const Mat&) {
                            g.accumulate(a, Mat::Constant(a.rows(), a.cols(), gr(0, 0) / n));
                          });
}

Var sum_rows(Var a) {
  Mat out = a.value().colwise().sum();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, gr.replicate(a.rows(), 1));
  });
}

// ---- row-wise normalizers ---------------------------------------------------

Var softmax_rows(Var a) {
  const Mat& x = a.value();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return a.graph().record(std::move(y), {a}, [a](Graph& g, const Mat& gr, const Mat& y) {
    Vec dot = gr.cwiseProduct(y).rowwise().sum();
    Mat ga = y.cwiseProduct(gr - dot.replicate(1, y.cols()));
    g.accumulate(a, ga);
  });
}

Var log_softmax_rows(Var a) {
  const Mat& x = a.value();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = x.row(r).array() - lse;
  }
  return a.graph().record(std::move(y), {a}, [a](Graph& g, const Mat& gr, const Mat& y) {
    Mat p = y.array().exp();
    Vec s = gr.rowwise().sum();
    g.accumulate(a, gr - p.cwiseProduct(s.replicate(1, y.cols())));
  });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  const Mat& x = a.value();
  const Eigen::Index n = x.cols();
  Mat xhat(x.rows(), n);
  Vec inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Mat y = xhat.cwiseProduct(gamma.value().replicate(x.rows(), 1)) + beta.value().replicate(x.rows(), 1);
  return a.graph().record(
      std::move(y), {a, gamma, beta},
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Mat& gr, const Mat&) {
        if (gamma.requires_grad()) g.accumulate(gamma, gr.cwiseProduct(xhat).colwise().sum());
        if (beta.requires_grad()) g.accumulate(beta, gr.colwise().sum());
        if (!a.requires_grad()) return;
        Mat gx = gr.cwiseProduct(gamma.value().replicate(gr.rows(), 1));
        Mat ga(gr.rows(), gr.cols());
        for (Eigen::Index r = 0; r < gr.rows(); ++r) {
          double m1 = gx.row(r).mean();
          double m2 = gx.row(r).cwiseProduct(xhat.row(r)).mean();
          ga.row(r) = (gx.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
        }
        g.accumulate(a, ga);
      });
}

Var l2_normalize_rows(Var a) {
  const Mat& x = a.value();
  Vec norms = x.rowwise().norm();
  if ((norms.array() <= 0.0).any()) throw std::domain_error("l2_normalize_rows: zero-norm row");
  Mat y = x.array().colwise() / norms.array();
  return a.graph().record(std::move(y), {a}, [a, norms](Graph& g, const Mat& gr, const Mat& y) {
    Vec dot = gr.cwiseProduct(y).rowwise().sum();
    Mat ga = (gr - y.cwiseProduct(dot.replicate(1, y.cols()))).array().colwise() / norms.array();
    g.accumulate(a, ga);
  });
}

// ---- shape ops --------------------------------------------------------------

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  Graph& graph = parts[0].graph();
  std::vector<Var> ps(parts.begin(), parts.end());
  return graph.record(std::move(out), std::span<const Var>(ps), [ps](Graph& g, const Mat& gr, const Mat&) {
    Eigen::Index r = 0;
    for (const Var& p : ps) {
      if (p.requires_grad()) g.accumulate(p, gr.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  Graph& graph = parts[0].graph();
  std::vector<Var> ps(parts.begin(), parts.end());
  return graph.record(std::move(out), std::span<const Var>(ps), [ps](Graph& g, const Mat& gr, const Mat&) {
    Eigen::Index c = 0;
    for (const Var& p : ps) {
      if (p.requires_grad()) g.accumulate(p, gr.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  return a.graph().record(a.value().middleRows(start, count), {a},
                          [a, start, count](Graph& g, const Mat& gr, const Mat&) {
                            Mat full = Mat::Zero(a.rows(), a.cols());
                            full.middleRows(start, count) = gr;
                            g.accumulate(a, full);
                          });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  return a.graph().record(a.value().middleCols(start, count), {a},
                          [a, start, count](Graph& g, const Mat& gr, const Mat&) {
                            Mat full = Mat::Zero(a.rows(), a.cols());
                            full.middleCols(start, count) = gr;
                            g.accumulate(a, full);
                          });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Mat& gr, const Mat&) {
    g.accumulate(a, Eigen::Map<const Mat>(gr.data(), a.rows(), a.cols()));
  });
}

Var transpose(Var a) {
  return a.graph().record(a.value().transpose(), {a},
                          [a](Graph& g, const Mat& gr, const Mat&) { g.accumulate(a, gr.transpose()); });
}

Var gather_elements(Var a, std::span<const int> idx) {
  const Mat& x = a.value();
  Mat out(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.size()) throw std::out_of_range("gather_elements");
    out(static_cast<Eigen::Index>(i), 0) = x.data()[idx[i]];
  }
  std::vector<int> ids(idx.begin(), idx.end());
  return a.graph().record(std::move(out), {a}, [a, ids = std::move(ids)](Graph& g, const Mat& gr, const Mat&) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) full.data()[ids[i]] += gr(static_cast<Eigen::Index>(i), 0);
    g.accumulate(a, full);
  });
}

Var im2col(Var a, int height, int width, int kernel, int stride, int pad) {
  const Mat& x = a.value();
  if (x.rows() != static_cast<Eigen::Index>(height) * width) throw std::invalid_argument("im2col: bad spatial size");
  const int out_h = (height + 2 * pad - kernel) / stride + 1;
  const int out_w = (width + 2 * pad - kernel) / stride + 1;
  const Eigen::Index c = x.cols();
  const int taps = kernel * kernel;
  std::vector<int> src(static_cast<std::size_t>(out_h) * out_w * taps, -1);
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx) {
          int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
          if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
          src[(static_cast<std::size_t>(oy) * out_w + ox) * taps + ky * kernel + kx] = iy * width + ix;
        }
  Mat out = Mat::Zero(static_cast<Eigen::Index>(out_h) * out_w, taps * c);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (int t = 0; t < taps; ++t) {
      int s = src[static_cast<std::size_t>(r) * taps + t];
      if (s >= 0) out.block(r, t * c, 1, c) = x.row(s);
    }
  return a.graph().record(std::move(out), {a}, [a, src = std::move(src), taps, c](Graph& g, const Mat& gr, const Mat&) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < gr.rows(); ++r)
      for (int t = 0; t < taps; ++t) {
        int s = src[static_cast<std::size_t>(r) * taps + t];
        if (s >= 0) full.row(s) += gr.block(r, t * c, 1, c);
      }
    g.accumulate(a, full);
  });
}

ResizeTable make_resize_table(int height, int width, int out_height, int out_width) {
  if (height <= 0 || width <= 0 || out_height <= 0 || out_width <= 0)
    throw std::invalid_argument("resize: non-positive size");
  ResizeTable t{height, width, out_height, out_width, {}, {}};
  auto axis = [](int in, int out, int o, int& i0, int& i1, double& frac) {
    double src = (o + 0.5) * static_cast<double>(in) / out - 0.5;
    if (src < 0) src = 0;
    i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    frac = src - i0;
  };
  const std::size_t n = static_cast<std::size_t>(out_height) * out_width;
  t.index.resize(n * 4);
  t.weight.resize(n * 4);
  for (int oy = 0; oy < out_height; ++oy) {
    int y0, y1;
    double fy;
    axis(height, out_height, oy, y0, y1, fy);
    for (int ox = 0; ox < out_width; ++ox) {
      int x0, x1;
      double fx;
      axis(width, out_width, ox, x0, x1, fx);
      std::size_t o = (static_cast<std::size_t>(oy) * out_width + ox) * 4;
      t.index[o + 0] = y0 * width + x0;
      t.index[o + 1] = y0 * width + x1;
      t.index[o + 2] = y1 * width + x0;
      t.index[o + 3] = y1 * width + x1;
      t.weight[o + 0] = (1 - fy) * (1 - fx);
      t.weight[o + 1] = (1 - fy) * fx;
      t.weight[o + 2] = fy * (1 - fx);
      t.weight[o + 3] = fy * fx;
    }
  }
  return t;
}

Mat apply_resize(const ResizeTable& t, const Mat& in) {
  if (in.rows() != static_cast<Eigen::Index>(t.in_h) * t.in_w) throw std::invalid_argument("resize: bad input size");
  const Eigen::Index n = static_cast<Eigen::Index>(t.out_h) * t.out_w;
  Mat out = Mat::Zero(n, in.cols());
  for (Eigen::Index r = 0; r < n; ++r)
    for (int k = 0; k < 4; ++k) {
      double w = t.weight[static_cast<std::size_t>(r) * 4 + k];
      if (w != 0.0) out.row(r) += w * in.row(t.index[static_cast<std::size_t>(r) * 4 + k]);
    }
  return out;
}

Var resize_bilinear(Var a, int height, int width, int out_height, int out_width) {
  if (height == out_height && width == out_width) return a;
  ResizeTable t = make_resize_table(height, width, out_height, out_width);
  Mat out = apply_resize(t, a.value());
  return a.graph().record(std::move(out), {a}, [a, t = std::move(t)](Graph& g, const Mat& gr, const Mat&) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < gr.rows(); ++r)
      for (int k = 0; k < 4; ++k) {
        double w = t.weight[static_cast<std::size_t>(r) * 4 + k];
        if (w != 0.0) full.row(t.index[static_cast<std::size_t>(r) * 4 + k]) += w * gr.row(r);
      }
    g.accumulate(a, full);
  });
}

// ---- attention --------------------------------------------------------------

Var attention(Var q, Var k, Var v, int heads, std::span<const std::uint8_t> allow) {
  const Eigen::Index nq = q.rows(), nk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != nk) throw std::invalid_argument("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0) throw std::invalid_argument("attention: heads must divide width");
  if (!allow.empty() && allow.size() != static_cast<std::size_t>(heads * nq * nk))
    throw std::invalid_argument("attention: mask size mismatch");
  const Eigen::Index dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Mat> probs(static_cast<std::size_t>(heads));
  Mat out(nq, d);
  for (int h = 0; h < heads; ++h) {
    Mat s = q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose() * inv;
    for (Eigen::Index i = 0; i < nq; ++i) {
      const std::uint8_t* m = allow.empty() ? nullptr : allow.data() + (static_cast<std::size_t>(h) * nq + i) * nk;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < nk; ++j)
        if (!m || m[j]) mx = std::max(mx, s(i, j));
      if (!std::isfinite(mx)) throw std::logic_error("attention: fully blocked row");
      double z = 0;
      for (Eigen::Index j = 0; j < nk; ++j) {
        double e = (!m || m[j]) ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        z += e;
      }
      s.row(i) /= z;
    }
    out.middleCols(h * dh, dh).noalias() = s * v.value().middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return q.graph().record(
      std::move(out), {q, k, v}, [q, k, v, heads, dh, inv, probs = std::move(probs)](Graph& g, const Mat& gr, const Mat&) {
        Mat gq = Mat::Zero(q.rows(), q.cols()), gk = Mat::Zero(k.rows(), k.cols()),
            gv = Mat::Zero(v.rows(), v.cols());
        for (int h = 0; h < heads; ++h) {
          const Mat& a = probs[static_cast<std::size_t>(h)];
          Mat go = gr.middleCols(h * dh, dh);
          gv.middleCols(h * dh, dh).noalias() = a.transpose() * go;
          Mat ga = go * v.value().middleCols(h * dh, dh).transpose();
          Vec dot = ga.cwiseProduct(a).rowwise().sum();
          Mat gs = a.cwiseProduct(ga - dot.replicate(1, a.cols())) * inv;
          gq.middleCols(h * dh, dh).noalias() = gs * k.value().middleCols(h * dh, dh);
          gk.middleCols(h * dh, dh).noalias() = gs.transpose() * q.value().middleCols(h * dh, dh);
        }
        g.accumulate(q, gq);
        g.accumulate(k, gk);
        g.accumulate(v, gv);
      });
}

}  // namespace sd
