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

#include "scaledepth/sasp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sd::sasp {

void SceneEmbeddingTable::validate() const {
  if (names.empty()) throw std::invalid_argument("embedding table: no categories");
  if (embeddings.rows() != static_cast<Eigen::Index>(names.size()))
    throw std::invalid_argument("embedding table: row count differs from name count");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of(" \t\r\n") != std::string::npos)
      throw std::invalid_argument("embedding table: category names must be non-empty single tokens");
    if (!seen.insert(n).second) throw std::invalid_argument("embedding table: duplicate category " + n);
  }
  if (!embeddings.allFinite()) throw std::invalid_argument("embedding table: non-finite entries");
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r)
    if (embeddings.row(r).norm() == 0.0) throw std::invalid_argument("embedding table: zero row for " + names[r]);
}

int SceneEmbeddingTable::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::out_of_range("embedding table: unknown category " + name);
}

Mat average_templates(const Mat& per_template, int categories, int templates) {
  if (per_template.rows() != static_cast<Eigen::Index>(categories) * templates)
    throw std::invalid_argument("average_templates: expected categories*templates rows");
  Mat out(categories, per_template.cols());
  for (int c = 0; c < categories; ++c) {
    out.row(c) = per_template.middleRows(static_cast<Eigen::Index>(c) * templates, templates).colwise().mean();
    double n = out.row(c).norm();
    if (n == 0.0) throw std::invalid_argument("average_templates: zero mean embedding");
    out.row(c) /= n;
  }
  return out;
}

SceneEmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("embedding table: cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::vector<long> dims;
  for (long v; hs >> v;) dims.push_back(v);
  if (dims.size() != 2 && dims.size() != 3) throw std::runtime_error("embedding table: header must be 'C D_t' or 'C T D_t'");
  const long c = dims.front(), d = dims.back(), t = dims.size() == 3 ? dims[1] : 1;
  if (c < 1 || d < 1 || t < 1) throw std::runtime_error("embedding table: non-positive dimensions");
  Mat raw(c * t, d);
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    if (!(in >> raw.data()[i])) throw std::runtime_error("embedding table: truncated matrix");
  SceneEmbeddingTable table;
  table.source = EmbeddingSource::File;
  std::string line;
  std::getline(in, line);  // rest of the last matrix row
  while (static_cast<long>(table.names.size()) < c && std::getline(in, line)) {
    if (line.empty()) continue;
    table.names.push_back(line);
  }
  if (static_cast<long>(table.names.size()) != c) throw std::runtime_error("embedding table: missing category names");
  table.embeddings = dims.size() == 3 ? average_templates(raw, static_cast<int>(c), static_cast<int>(t)) : raw;
  table.validate();
  return table;
}

void save_embedding_table(const SceneEmbeddingTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("embedding table: cannot open " + path.string());
  out << table.size() << ' ' << table.dim() << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < table.embeddings.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.embeddings.cols(); ++c) out << (c ? " " : "") << table.embeddings(r, c);
    out << '\n';
  }
  for (const auto& n : table.names) out << n << '\n';
  if (!out) throw std::runtime_error("embedding table: write failed for " + path.string());
}

int SceneLogits::argmax() const {
  Eigen::Index i = 0;
  probs.maxCoeff(&i);
  return static_cast<int>(i);
}

// ---- differentiable ---------------------------------------------------------

Var pool_scale_queries(Var scale_queries, Var weight, Var bias) {
  Var flat = reshape(scale_queries, 1, scale_queries.rows() * scale_queries.cols());
  return add(matmul(flat, weight), bias);
}

Var similarity_logits(Var pooled, Var table, Var log_tau) {
  if (pooled.value().norm() == 0.0) throw std::domain_error("text-image similarity: zero-norm image feature");
  Var cos = matmul_nt(l2_normalize_rows(pooled), l2_normalize_rows(table));  // 1 x C
  return mul(cos, exp(scale(log_tau, -1.0)));
}

Var synthesize_metric(Var scale, Var relative) { return mul(relative, scale); }

// ---- value level ------------------------------------------------------------

Vec pool_scale_queries(const Mat& scale_queries, const Mat& weight, const Vec& bias) {
  Graph g;
  Var out = pool_scale_queries(g.constant(scale_queries), g.constant(weight), g.constant(bias.transpose()));
  return out.value().row(0).transpose();
}

SceneLogits text_image_similarity(const Vec& pooled, const SceneEmbeddingTable& table, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("text-image similarity: tau must be positive");
  if (pooled.size() != table.dim()) throw std::invalid_argument("text-image similarity: dimension mismatch");
  table.validate();
  Graph g;
  Var logits = similarity_logits(g.constant(pooled.transpose()), g.constant(table.embeddings),
                                 g.constant(Mat::Constant(1, 1, std::log(tau))));
  Var probs = softmax_rows(logits);
  return SceneLogits{probs.value().row(0).transpose(), tau};
}

ScaleFactor scale_from_log(double head_output) {
  double s = std::exp(head_output);
  if (!(s > 0) || !std::isfinite(s)) throw std::domain_error("scale factor not positive and finite");
  return ScaleFactor{s};
}

DepthMap synthesize_metric(ScaleFactor scale, const DepthMap& relative) {
  if (relative.kind() != DepthKind::Relative) throw std::invalid_argument("synthesize_metric: expected relative map");
  Mat values = relative.values() * scale.value;
  return DepthMap(std::move(values), relative.valid(), DepthKind::Metric);
}

}  // namespace sd::sasp
