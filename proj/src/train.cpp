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

#include "scaledepth/train.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scaledepth/checkpoint.hpp"

namespace sd::train {

namespace {

namespace pt = boost::property_tree;

template <class T>
T parse_value(const std::string& section, const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  if (!(is >> out) || !(is >> std::ws).eof())
    throw std::invalid_argument("config [" + section + "] " + key + ": cannot parse '" + v + "'");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (!(optim.lr > 0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (!(optim.weight_decay >= 0)) throw std::invalid_argument("TrainConfig: weight_decay must be non-negative");
  if (!(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1))
    throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
  if (!(optim.eps > 0)) throw std::invalid_argument("TrainConfig: eps must be positive");
  if (!(optim.encoder_lr_scale > 0)) throw std::invalid_argument("TrainConfig: encoder_lr_scale must be positive");
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be at least 1");
  if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (crop_size < 0 || crop_size % 32 != 0) throw std::invalid_argument("TrainConfig: crop_size must be a multiple of 32");
  eval_policy.validate();
}

TrainConfig TrainConfig::from_ini_text(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  TrainConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
    if (section == "model") {
      std::string model_text;
      for (const auto& [k, v] : body) model_text += k + " = " + v.get_value<std::string>() + "\n";
      c.model = network::ModelConfig::parse(model_text);
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      auto d = [&] { return parse_value<double>(section, key, v); };
      auto i = [&] { return parse_value<int>(section, key, v); };
      bool known = true;
      if (section == "loss") {
        if (key == "alpha") c.loss.alpha = d();
        else if (key == "lambda") c.loss.lambda = d();
        else if (key == "beta") c.loss.beta = d();
        else known = false;
      } else if (section == "optim") {
        if (key == "lr") c.optim.lr = d();
        else if (key == "weight_decay") c.optim.weight_decay = d();
        else if (key == "beta1") c.optim.beta1 = d();
        else if (key == "beta2") c.optim.beta2 = d();
        else if (key == "eps") c.optim.eps = d();
        else if (key == "encoder_lr_scale") c.optim.encoder_lr_scale = d();
        else if (key == "schedule") {
          if (v == "constant") c.optim.schedule = LrSchedule::Constant;
          else if (v == "cosine") c.optim.schedule = LrSchedule::Cosine;
          else throw std::invalid_argument("config: [optim] schedule must be constant or cosine, got '" + v + "'");
        } else known = false;
      } else if (section == "train") {
        if (key == "iterations") c.iterations = i();
        else if (key == "batch_size") c.batch_size = i();
        else if (key == "seed") c.seed = parse_value<std::uint64_t>(section, key, v);
        else if (key == "crop_size") c.crop_size = i();
        else if (key == "log_every") c.log_every = i();
        else known = false;
      } else if (section == "eval") {
        if (key == "min_depth") c.eval_policy.min_depth = d();
        else if (key == "max_depth") c.eval_policy.max_depth = d();
        else known = false;
      } else {
        throw std::invalid_argument("config: unknown section [" + section + "]");
      }
      if (!known) throw std::invalid_argument("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
  c.validate();
  return c;
}

double TrainConfig::lr_at(int iteration) const {
  if (optim.schedule == LrSchedule::Constant) return optim.lr;
  const double t = std::clamp(static_cast<double>(iteration) / iterations, 0.0, 1.0);
  return 0.5 * optim.lr * (1.0 + std::cos(std::numbers::pi * t));
}

TrainConfig TrainConfig::from_ini(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_ini_text(ss.str());
}

std::string TrainConfig::to_ini() const {
  std::ostringstream os;
  os << "[model]\n" << model.canonical();
  os << "\n[loss]\nalpha = " << fmt(loss.alpha) << "\nlambda = " << fmt(loss.lambda) << "\nbeta = " << fmt(loss.beta);
  os << "\n\n[optim]\nlr = " << fmt(optim.lr) << "\nweight_decay = " << fmt(optim.weight_decay)
     << "\nbeta1 = " << fmt(optim.beta1) << "\nbeta2 = " << fmt(optim.beta2) << "\neps = " << fmt(optim.eps)
     << "\nencoder_lr_scale = " << fmt(optim.encoder_lr_scale)
     << "\nschedule = " << (optim.schedule == LrSchedule::Cosine ? "cosine" : "constant");
  os << "\n\n[train]\niterations = " << iterations << "\nbatch_size = " << batch_size << "\nseed = " << seed
     << "\ncrop_size = " << crop_size << "\nlog_every = " << log_every;
  os << "\n\n[eval]\nmin_depth = " << fmt(eval_policy.min_depth) << "\nmax_depth = " << fmt(eval_policy.max_depth)
     << '\n';
  return os.str();
}

void TrainConfig::apply_env() {
  if (const char* s = std::getenv("SCALEDEPTH_SEED"); s && *s) seed = parse_value<std::uint64_t>("env", "SCALEDEPTH_SEED", s);
}

AdamW::AdamW(const ParameterSet& params) : m_(params.zeros_like()), v_(params.zeros_like()) {}

void AdamW::step(ParameterSet& params, const std::vector<Mat>& grads, const OptimConfig& cfg, bool pretrained_encoder) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw std::invalid_argument("AdamW: gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const double lr = (pretrained_encoder && p.encoder) ? cfg.lr * cfg.encoder_lr_scale : cfg.lr;
    m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grads[i];
    v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
    p.value *= 1.0 - lr * cfg.weight_decay;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg.eps);
  }
}

synth::Sample crop(const synth::Sample& s, int y0, int x0, int height, int width) {
  const int H = s.image.height, W = s.image.width;
  if (y0 < 0 || x0 < 0 || height <= 0 || width <= 0 || y0 + height > H || x0 + width > W)
    throw std::invalid_argument("crop: window outside the image");
  Mat px(static_cast<Eigen::Index>(height) * width, 3);
  for (int y = 0; y < height; ++y)
    px.middleRows(static_cast<Eigen::Index>(y) * width, width) =
        s.image.pixels.middleRows(static_cast<Eigen::Index>(y + y0) * W + x0, width);
  synth::Sample out{RgbImage{height, width, std::move(px)},
                    DepthMap(s.depth.values().block(y0, x0, height, width), s.depth.valid().block(y0, x0, height, width),
                             s.depth.kind()),
                    s.category, s.spec};
  out.spec.height = height;
  out.spec.width = width;
  return out;
}

Trainer::Trainer(const TrainConfig& cfg, const sasp::SceneEmbeddingTable* table)
    : cfg_(cfg), table_(table), model_((cfg.validate(), cfg.model), cfg.seed), opt_(model_.parameters()) {
  if (table_) {
    table_->validate();
    if (table_->dim() != cfg_.model.text_dim)
      throw std::invalid_argument("Trainer: embedding width differs from the model text dimension");
  }
}

losses::LossBreakdown Trainer::sample_loss(const synth::Sample& s, std::vector<Mat>* grads, double scale) const {
  Graph g;
  network::ForwardOutput f = model_.forward(g, s.image, table_);
  Var si = losses::si_loss(f.relative, f.metric, s.depth, cfg_.loss);
  Var total = si;
  std::optional<double> ti;
  if (table_) {
    Var t = losses::ti_loss(f.scene_logits, s.category);
    ti = t.item();
    if (cfg_.loss.beta > 0) total = add(si, sd::scale(t, cfg_.loss.beta));
  }
  if (grads) {
    g.backward(sd::scale(total, scale));
    g.accumulate_param_grads(*grads);
  }
  return losses::total_loss(si.item(), ti, cfg_.loss, s.depth.valid_count());
}

StepLog Trainer::step(std::span<const synth::Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("Trainer::step: empty batch");
  std::vector<Mat> grads = model_.parameters().zeros_like();
  const double inv = 1.0 / static_cast<double>(batch.size());
  StepLog l;
  l.iteration = iteration_;
  for (const synth::Sample& s : batch) {
    losses::LossBreakdown b = sample_loss(s, &grads, inv);
    l.si += b.si * inv;
    l.ti += b.ti * inv;
    l.total += b.total * inv;
  }
  OptimConfig optim = cfg_.optim;
  optim.lr = cfg_.lr_at(iteration_);
  opt_.step(model_.parameters(), grads, optim, cfg_.model.encoder_pretrained);
  ++iteration_;
  log_.push_back(l);
  return l;
}

void Trainer::fit(const std::vector<synth::Sample>& data, const std::function<void(const StepLog&)>& on_step) {
  if (data.empty()) throw std::invalid_argument("Trainer::fit: no training data");
  const std::size_t n = data.size();
  const std::size_t b = static_cast<std::size_t>(cfg_.batch_size);
  while (iteration_ < cfg_.iterations) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(iteration_)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<synth::Sample> batch;
    batch.reserve(b);
    for (std::size_t k = 0; k < b; ++k) {
      const synth::Sample& s = data[idx[k % n]];
      const int c = cfg_.crop_size;
      if (c > s.image.height || c > s.image.width) throw std::invalid_argument("crop_size exceeds the image");
      if (c > 0 && (c < s.image.height || c < s.image.width)) {
        const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(s.image.height - c + 1));
        const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(s.image.width - c + 1));
        batch.push_back(crop(s, y0, x0, c, c));
      } else {
        batch.push_back(s);
      }
    }
    StepLog l = step(batch);
    if (on_step) on_step(l);
  }
}

void Trainer::save(const std::filesystem::path& path) const {
  checkpoint::Archive a = checkpoint::archive_model(model_);
  a.meta["iteration"] = std::to_string(iteration_);
  a.meta["train_config"] = cfg_.to_ini();
  a.meta["adam_steps"] = std::to_string(opt_.steps());
  for (std::size_t i = 0; i < model_.parameters().size(); ++i) {
    a.tensors.emplace_back("adam.m/" + model_.parameters()[i].name, opt_.first_moment()[i]);
    a.tensors.emplace_back("adam.v/" + model_.parameters()[i].name, opt_.second_moment()[i]);
  }
  Mat log(static_cast<Eigen::Index>(log_.size()), 4);
  for (std::size_t i = 0; i < log_.size(); ++i)
    log.row(static_cast<Eigen::Index>(i)) << log_[i].iteration, log_[i].si, log_[i].ti, log_[i].total;
  a.tensors.emplace_back("train.log", std::move(log));
  checkpoint::save_archive(a, path);
}

void Trainer::resume(const std::filesystem::path& path) {
  checkpoint::Archive a = checkpoint::load_archive(path);
  checkpoint::restore_parameters(model_, a);
  auto need = [&](const std::string& name) -> const Mat& {
    const Mat* m = a.find(name);
    if (!m) throw std::runtime_error("checkpoint has no optimizer state (" + name + ")");
    return *m;
  };
  for (std::size_t i = 0; i < model_.parameters().size(); ++i) {
    opt_.first_moment()[i] = need("adam.m/" + model_.parameters()[i].name);
    opt_.second_moment()[i] = need("adam.v/" + model_.parameters()[i].name);
  }
  opt_.set_steps(std::stoll(a.meta.at("adam_steps")));
  iteration_ = std::stoi(a.meta.at("iteration"));
  const Mat& log = need("train.log");
  log_.clear();
  for (Eigen::Index i = 0; i < log.rows(); ++i)
    log_.push_back(StepLog{static_cast<int>(log(i, 0)), log(i, 1), log(i, 2), log(i, 3)});
}

std::string format_log(std::span<const StepLog> log) {
  std::ostringstream os;
  os.precision(17);
  for (const StepLog& l : log) os << l.iteration << ' ' << l.si << ' ' << l.ti << ' ' << l.total << '\n';
  return os.str();
}

EvalResult evaluate(const network::Model& model, std::span<const synth::Sample> data, const ValidityPolicy& policy,
                    bool oracle) {
  policy.validate();
  EvalResult r;
  double scale_sum = 0;
  for (const synth::Sample& s : data) {
    const std::size_t index = static_cast<std::size_t>(&s - data.data());
    if (apply_validity(s.depth, policy).valid_count() == 0) {
      r.skipped.push_back(index);
      continue;
    }
    r.scored.push_back(index);
    if (oracle) {
      r.per_image.push_back(metrics::evaluate(s.depth, s.depth, policy));
      continue;
    }
    network::Prediction p = network::predict_padded(model, s.image, nullptr);
    scale_sum += p.scale.value;
    r.per_image.push_back(metrics::evaluate(p.metric, s.depth, policy));
  }
  if (r.per_image.empty()) throw std::invalid_argument("evaluate: every image was skipped");
  r.mean = metrics::aggregate(r.per_image);
  r.mean_scale = oracle ? 0.0 : scale_sum / static_cast<double>(r.per_image.size());
  return r;
}

}  // namespace sd::train
