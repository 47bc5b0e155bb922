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

#include "scaledepth/network.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scaledepth/nn.hpp"

namespace sd::network {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string level_name(const char* stem, int level) { return std::string(stem) + std::to_string(level); }


Var multi_head(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x, Var keys, Var values, int heads,
               std::span<const std::uint8_t> allow) {
  Var q = nn::linear(g, ps, prefix + ".q", x);
  Var k = nn::linear(g, ps, prefix + ".k", keys);
  Var v = nn::linear(g, ps, prefix + ".v", values);
  return nn::linear(g, ps, prefix + ".o", attention(q, k, v, heads, allow));
}

void add_attention(ParameterSet& ps, const std::string& prefix, int width, nn::Rng& rng) {
  for (const char* part : {".q", ".k", ".v", ".o"}) nn::add_linear(ps, prefix + part, width, width, rng);
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw std::invalid_argument(std::string("ModelConfig: ") + what + " must be positive");
  };
  positive(width, "width");
  positive(bins, "bins");
  positive(scale_queries, "scale_queries");
  positive(heads, "heads");
  positive(blocks, "blocks");
  positive(layers_per_block, "layers_per_block");
  positive(text_dim, "text_dim");
  positive(ffn_dim, "ffn_dim");
  for (int w : encoder_widths) positive(w, "encoder width");
  if (width % heads != 0) throw std::invalid_argument("ModelConfig: heads must divide width");
  if (width % 4 != 0) throw std::invalid_argument("ModelConfig: width must be a multiple of 4");
  if (!(tau_init > 0) || !std::isfinite(tau_init)) throw std::invalid_argument("ModelConfig: tau_init must be positive");
  if (!std::isfinite(log_scale_init)) throw std::invalid_argument("ModelConfig: log_scale_init must be finite");
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "width = " << width << "\nbins = " << bins << "\nscale_queries = " << scale_queries
     << "\nheads = " << heads << "\nblocks = " << blocks << "\nlayers_per_block = " << layers_per_block
     << "\ntext_dim = " << text_dim << "\nffn_dim = " << ffn_dim << "\nencoder_widths = " << encoder_widths[0]
     << ',' << encoder_widths[1] << ',' << encoder_widths[2] << ',' << encoder_widths[3]
     << "\ntau_init = " << tau_init << "\nlog_scale_init = " << log_scale_init
     << "\nencoder_pretrained = " << (encoder_pretrained ? 1 : 0) << '\n';
  return os.str();
}

std::uint64_t ModelConfig::hash() const { return fnv1a(canonical()); }

ModelConfig ModelConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  for (const auto& [key, node] : tree) {
    const std::string v = node.get_value<std::string>();
    try {
      if (key == "width") c.width = std::stoi(v);
      else if (key == "bins") c.bins = std::stoi(v);
      else if (key == "scale_queries") c.scale_queries = std::stoi(v);
      else if (key == "heads") c.heads = std::stoi(v);
      else if (key == "blocks") c.blocks = std::stoi(v);
      else if (key == "layers_per_block") c.layers_per_block = std::stoi(v);
      else if (key == "text_dim") c.text_dim = std::stoi(v);
      else if (key == "ffn_dim") c.ffn_dim = std::stoi(v);
      else if (key == "tau_init") c.tau_init = std::stod(v);
      else if (key == "log_scale_init") c.log_scale_init = std::stod(v);
      else if (key == "encoder_pretrained") c.encoder_pretrained = std::stoi(v) != 0;
      else if (key == "encoder_widths") {
        std::istringstream ws(v);
        std::string item;
        for (int i = 0; i < kLevels; ++i) {
          if (!std::getline(ws, item, ',')) throw std::invalid_argument("expected four encoder widths");
          c.encoder_widths[i] = std::stoi(item);
        }
        if (std::getline(ws, item, ',')) throw std::invalid_argument("expected four encoder widths");
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("model config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.width = 8;
  c.bins = 4;
  c.scale_queries = 2;
  c.heads = 2;
  c.text_dim = 8;
  c.ffn_dim = 4;
  c.encoder_widths = {4, 4, 8, 8};
  return c;
}

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.width = 128;
  c.bins = 64;
  c.scale_queries = 8;
  c.heads = 8;
  c.text_dim = 128;
  c.ffn_dim = 512;
  c.encoder_widths = {64, 128, 256, 512};
  return c;
}

std::vector<std::uint8_t> cross_attention_allow(const arde::AttentionMaskSet& m, int scale_queries) {
  const std::size_t plane = static_cast<std::size_t>(m.height) * m.width;
  const std::size_t nq = static_cast<std::size_t>(m.bins + scale_queries);
  std::vector<std::uint8_t> allow(static_cast<std::size_t>(m.heads) * nq * plane, 1);
  for (int h = 0; h < m.heads; ++h)
    for (int b = 0; b < m.bins; ++b)
      std::copy_n(m.allow.begin() + static_cast<std::ptrdiff_t>(m.offset(b, h)), plane,
                  allow.begin() + static_cast<std::ptrdiff_t>((h * nq + b) * plane));
  return allow;
}

int attended_level(int layer) { return 3 - layer % 3; }

Mat sine_position_encoding(int height, int width, int channels) {
  if (channels % 4 != 0) throw std::invalid_argument("sine_position_encoding: channels must be a multiple of 4");
  const int f = channels / 4;
  Mat pe(static_cast<Eigen::Index>(height) * width, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double yn = (y + 0.5) / height * 2.0 * std::numbers::pi;
      const double xn = (x + 0.5) / width * 2.0 * std::numbers::pi;
      auto row = pe.row(static_cast<Eigen::Index>(y) * width + x);
      for (int i = 0; i < f; ++i) {
        const double w = std::pow(100.0, -static_cast<double>(i) / f);
        row(i) = std::sin(yn / w);
        row(f + i) = std::cos(yn / w);
        row(2 * f + i) = std::sin(xn / w);
        row(3 * f + i) = std::cos(xn / w);
      }
    }
  return pe;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const int d = cfg_.width;
  int in = 3;
  for (int l = 0; l < kLevels; ++l) {
    const int w = cfg_.encoder_widths[l];
    const std::string p = level_name("encoder.stage", l);
    nn::add_conv(params_, p + ".down", in, w, l == 0 ? 4 : 2, rng, true);
    nn::add_layer_norm(params_, p + ".norm", w, true);
    nn::add_conv(params_, p + ".conv", w, w, 3, rng, true);
    in = w;
  }
  for (int l = 0; l < kLevels; ++l) {
    nn::add_linear(params_, level_name("pixel.lateral", l), cfg_.encoder_widths[l], d, rng);
    nn::add_linear(params_, level_name("pixel.out", l), d, d, rng);
  }
  params_.add("decoder.level_embed", nn::normal(rng, kLevels - 1, d, 0.1));
  params_.add("decoder.query.bin", nn::normal(rng, cfg_.bins, d, 1.0));
  params_.add("decoder.query.scale", nn::normal(rng, cfg_.scale_queries, d, 1.0));
  for (int t = 0; t < cfg_.layers(); ++t) {
    const std::string p = layer_prefix(t);
    add_attention(params_, p + ".cross", d, rng);
    nn::add_layer_norm(params_, p + ".cross_norm", d);
    add_attention(params_, p + ".self", d, rng);
    nn::add_layer_norm(params_, p + ".self_norm", d);
    nn::add_mlp(params_, p + ".ffn", d, cfg_.ffn_dim, d, rng);
    nn::add_layer_norm(params_, p + ".ffn_norm", d);
  }
  arde::BinHead::add_parameters(params_, "arde.head", d, rng);
  const int md = cfg_.scale_queries * d;
  nn::add_mlp(params_, "sasp.scale", md, d, 1, rng);
  params_.at("sasp.scale.fc2.bias").value(0, 0) = cfg_.log_scale_init;
  params_.add("sasp.pool.weight", nn::uniform(rng, md, cfg_.text_dim, 1.0 / std::sqrt(static_cast<double>(md))));
  params_.add("sasp.pool.bias", Mat::Zero(1, cfg_.text_dim));
  params_.add("sasp.log_tau", Mat::Constant(1, 1, std::log(cfg_.tau_init)));
}

double Model::tau() const { return std::exp(params_.at("sasp.log_tau").value(0, 0)); }

void Model::check_image(const RgbImage& image) const {
  if (image.height <= 0 || image.width <= 0 || image.height % 32 != 0 || image.width % 32 != 0)
    throw std::invalid_argument("model input height and width must be positive multiples of 32");
  if (image.pixels.rows() != static_cast<Eigen::Index>(image.height) * image.width || image.pixels.cols() != 3)
    throw std::invalid_argument("model input pixel buffer does not match its size");
  if (!image.pixels.allFinite()) throw std::invalid_argument("model input contains non-finite values");
}

FeaturePyramid Model::encode(Graph& g, const RgbImage& image) const {
  check_image(image);
  FeaturePyramid out;
  Var x = add_scalar(g.constant(image.pixels), -0.5);
  int h = image.height, w = image.width;
  for (int l = 0; l < kLevels; ++l) {
    const std::string p = level_name("encoder.stage", l);
    const int k = l == 0 ? 4 : 2;
    x = nn::conv2d(g, params_, p + ".down", x, h, w, k, k, 0);
    h /= k;
    w /= k;
    x = gelu(nn::layer_norm(g, params_, p + ".norm", x));
    x = add(x, gelu(nn::conv2d(g, params_, p + ".conv", x, h, w, 3, 1, 1)));
    out.levels[l] = FeatureLevel{h, w, x};
  }
  return out;
}

FeaturePyramid Model::pixel_decode(Graph& g, const FeaturePyramid& raw) const {
  FeaturePyramid out;
  Var fused;
  for (int l = kLevels - 1; l >= 0; --l) {
    const FeatureLevel& in = raw.levels[l];
    Var lat = nn::linear(g, params_, level_name("pixel.lateral", l), in.features);
    if (fused.defined()) {
      const FeatureLevel& coarse = raw.levels[l + 1];
      lat = add(lat, resize_bilinear(fused, coarse.height, coarse.width, in.height, in.width));
    }
    fused = lat;
    out.levels[l] = FeatureLevel{in.height, in.width, nn::linear(g, params_, level_name("pixel.out", l), gelu(fused))};
  }
  return out;
}

DecoderOutput Model::decode_queries(Graph& g, const FeaturePyramid& pyramid,
                                    const std::vector<arde::AttentionMaskSet>* frozen_masks) const {
  const int n = cfg_.bins, m = cfg_.scale_queries, layers = cfg_.layers();
  if (frozen_masks && static_cast<int>(frozen_masks->size()) != layers)
    throw std::invalid_argument("decode_queries: frozen mask count must equal the layer count");
  const FeatureLevel& fine = pyramid.levels[0];
  Var level_embed = g.param(params_, "decoder.level_embed");
  Var bin_q = g.param(params_, "decoder.query.bin");
  Var scale_q = g.param(params_, "decoder.query.scale");
  const Var init[2] = {bin_q, scale_q};
  Var x = concat_rows(init);

  DecoderOutput out;
  for (int t = 0; t < layers; ++t) {
    const int li = attended_level(t);
    const FeatureLevel& lvl = pyramid.levels[li];
    out.layer_levels.push_back(li);
    if (frozen_masks) {
      out.masks.push_back((*frozen_masks)[t]);
    } else if (t == 0) {
      out.masks.push_back(arde::AttentionMaskSet::all_allow(n, cfg_.heads, lvl.height, lvl.width));
    } else {
      // Masks come from the previous layer's detached bin prediction.
      Var prev = g.detach(out.bin_states.back());
      auto head = arde::BinHead::forward(g, params_, "arde.head", prev);
      arde::SimilarityVolume sim{n, fine.height, fine.width,
                                 fine.features.value() * head.features.value().transpose()};
      out.masks.push_back(arde::generate_masks(sim, lvl.height, lvl.width, cfg_.heads));
    }
    const arde::AttentionMaskSet& mask = out.masks.back();
    if (mask.height != lvl.height || mask.width != lvl.width || mask.bins != n || mask.heads != cfg_.heads)
      throw std::invalid_argument("decode_queries: mask shape does not match the attended level");

    const std::string p = layer_prefix(t);
    Var memory = add(lvl.features, slice_rows(level_embed, li - 1, 1));
    Var keys = add(memory, g.constant(sine_position_encoding(lvl.height, lvl.width, cfg_.width)));
    std::vector<std::uint8_t> allow = cross_attention_allow(mask, m);
    x = nn::layer_norm(g, params_, p + ".cross_norm",
                       add(x, multi_head(g, params_, p + ".cross", x, keys, memory, cfg_.heads, allow)));
    x = nn::layer_norm(g, params_, p + ".self_norm",
                       add(x, multi_head(g, params_, p + ".self", x, x, x, cfg_.heads, {})));
    x = nn::layer_norm(g, params_, p + ".ffn_norm", add(x, nn::mlp(g, params_, p + ".ffn", x)));
    out.bin_states.push_back(slice_rows(x, 0, n));
    out.scale_states.push_back(slice_rows(x, n, m));
  }
  out.final_bins = arde::BinHead::forward(g, params_, "arde.head", out.bin_states.back());
  out.final_logits = arde::similarity_logits(fine.features, out.final_bins.features);
  out.logits_height = fine.height;
  out.logits_width = fine.width;
  return out;
}

ForwardOutput Model::forward(Graph& g, const RgbImage& image, const sasp::SceneEmbeddingTable* table,
                             const std::vector<arde::AttentionMaskSet>* frozen_masks) const {
  if (table) {
    table->validate();
    if (table->dim() != cfg_.text_dim) throw std::invalid_argument("forward: embedding table width mismatch");
  }
  ForwardOutput out;
  out.height = image.height;
  out.width = image.width;
  FeaturePyramid pyramid = pixel_decode(g, encode(g, image));
  out.decoder = decode_queries(g, pyramid, frozen_masks);
  const DecoderOutput& dec = out.decoder;
  out.relative_coarse = arde::relative_depth(dec.final_bins.centers, dec.final_logits);
  out.relative = resize_bilinear(out.relative_coarse, dec.logits_height, dec.logits_width, image.height, image.width);

  Var sq = dec.scale_states.back();
  Var flat = reshape(sq, 1, sq.rows() * sq.cols());
  out.log_scale = nn::mlp(g, params_, "sasp.scale", flat);
  out.scale = exp(out.log_scale);
  out.metric = sasp::synthesize_metric(out.scale, out.relative);
  if (table) {
    Var pooled = sasp::pool_scale_queries(sq, g.param(params_, "sasp.pool.weight"), g.param(params_, "sasp.pool.bias"));
    out.scene_logits = sasp::similarity_logits(pooled, g.constant(table->embeddings), g.param(params_, "sasp.log_tau"));
  }
  return out;
}

Prediction Model::predict(const RgbImage& image, const sasp::SceneEmbeddingTable* table) const {
  Graph g;
  ForwardOutput f = forward(g, image, table);
  Mat rel = Eigen::Map<const Mat>(f.relative.value().data(), image.height, image.width);
  DepthMap relative = DepthMap::dense(std::move(rel), DepthKind::Relative);
  sasp::ScaleFactor s = sasp::scale_from_log(f.log_scale.item());
  Prediction p{sasp::synthesize_metric(s, relative), std::move(relative), s, std::nullopt};
  if (table) {
    Var probs = softmax_rows(f.scene_logits);
    p.scene = sasp::SceneLogits{probs.value().row(0).transpose(), tau()};
  }
  return p;
}

RgbImage reflect_pad(const RgbImage& image, int height, int width) {
  if (height < image.height || width < image.width) throw std::invalid_argument("reflect_pad: target smaller than image");
  if ((height > image.height && image.height < 2) || (width > image.width && image.width < 2) ||
      height - image.height >= image.height || width - image.width >= image.width)
    throw std::invalid_argument("reflect_pad: image too small to reflect");
  auto reflect = [](int i, int n) { return i < n ? i : 2 * (n - 1) - i; };
  Mat px(static_cast<Eigen::Index>(height) * width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      px.row(static_cast<Eigen::Index>(y) * width + x) =
          image.pixels.row(static_cast<Eigen::Index>(reflect(y, image.height)) * image.width + reflect(x, image.width));
  return RgbImage{height, width, std::move(px)};
}

Prediction predict_padded(const Model& model, const RgbImage& image, const sasp::SceneEmbeddingTable* table) {
  const int h = (image.height + 31) / 32 * 32, w = (image.width + 31) / 32 * 32;
  if (h == image.height && w == image.width) return model.predict(image, table);
  Prediction p = model.predict(reflect_pad(image, h, w), table);
  Mat rel = p.relative.values().topLeftCorner(image.height, image.width);
  DepthMap relative = DepthMap::dense(std::move(rel), DepthKind::Relative);
  return Prediction{sasp::synthesize_metric(p.scale, relative), std::move(relative), p.scale, std::move(p.scene)};
}

}  // namespace sd::network
