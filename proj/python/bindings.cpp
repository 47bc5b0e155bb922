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


#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "scaledepth/arde.hpp"
#include "scaledepth/checkpoint.hpp"
#include "scaledepth/losses.hpp"
#include "scaledepth/metrics.hpp"
#include "scaledepth/network.hpp"
#include "scaledepth/synth.hpp"
#include "scaledepth/train.hpp"

namespace py = pybind11;
using namespace sd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RgbImage to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("image must have shape (H, W, 3)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  RgbImage img{h, w, Mat(static_cast<Eigen::Index>(h) * w, 3)};
  std::copy(a.data(), a.data() + a.size(), img.pixels.data());
  return img;
}

Array from_image(const RgbImage& img) {
  Array a({img.height, img.width, 3});
  std::copy(img.pixels.data(), img.pixels.data() + img.pixels.size(), a.mutable_data());
  return a;
}

Mask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& m) {
  if (m.ndim() != 2) throw std::invalid_argument("mask must be two-dimensional");
  Mask out(m.shape(0), m.shape(1));
  for (py::ssize_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] ? 1 : 0;
  return out;
}

py::array_t<bool> from_mask(const Mask& m) {
  py::array_t<bool> a({m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.size(); ++i) a.mutable_data()[i] = m.data()[i] != 0;
  return a;
}

DepthMap depth_map(const Mat& values, const std::optional<py::array_t<bool, py::array::c_style | py::array::forcecast>>& valid,
                   DepthKind kind) {
  return valid ? DepthMap(values, to_mask(*valid), kind) : DepthMap::dense(values, kind);
}

py::dict report_dict(const metrics::MetricReport& r) {
  py::dict d;
  d["arel"] = r.arel;
  d["srel"] = r.srel;
  d["rmse"] = r.rmse;
  d["rmsl"] = r.rmsl;
  d["log10"] = r.log10;
  d["silog"] = r.silog;
  d["delta1"] = r.delta1;
  d["delta2"] = r.delta2;
  d["delta3"] = r.delta3;
  d["n_valid"] = r.n_valid;
  d["n_clamped"] = r.n_clamped;
  return d;
}

py::dict prediction_dict(const network::Prediction& p, const sasp::SceneEmbeddingTable* table) {
  py::dict d;
  d["metric"] = p.metric.values();
  d["relative"] = p.relative.values();
  d["scale"] = p.scale.value;
  if (p.scene) {
    d["scene_probs"] = p.scene->probs;
    d["scene"] = table->names[static_cast<std::size_t>(p.scene->argmax())];
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metric depth from adaptive relative depth and a predicted scene scale";

  py::class_<network::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("width", &network::ModelConfig::width)
      .def_readwrite("bins", &network::ModelConfig::bins)
      .def_readwrite("scale_queries", &network::ModelConfig::scale_queries)
      .def_readwrite("heads", &network::ModelConfig::heads)
      .def_readwrite("blocks", &network::ModelConfig::blocks)
      .def_readwrite("layers_per_block", &network::ModelConfig::layers_per_block)
      .def_readwrite("text_dim", &network::ModelConfig::text_dim)
      .def_readwrite("ffn_dim", &network::ModelConfig::ffn_dim)
      .def_readwrite("encoder_widths", &network::ModelConfig::encoder_widths)
      .def_readwrite("tau_init", &network::ModelConfig::tau_init)
      .def_readwrite("log_scale_init", &network::ModelConfig::log_scale_init)
      .def("validate", &network::ModelConfig::validate)
      .def("canonical", &network::ModelConfig::canonical)
      .def("hash", &network::ModelConfig::hash)
      .def_static("parse", &network::ModelConfig::parse)
      .def_static("tiny", &network::ModelConfig::tiny)
      .def_static("large", &network::ModelConfig::large);

  py::class_<sasp::SceneEmbeddingTable>(m, "SceneEmbeddingTable")
      .def_readonly("names", &sasp::SceneEmbeddingTable::names)
      .def_readonly("embeddings", &sasp::SceneEmbeddingTable::embeddings)
      .def("save", [](const sasp::SceneEmbeddingTable& t, const std::filesystem::path& p) { sasp::save_embedding_table(t, p); })
      .def_static("load", &sasp::load_embedding_table);
  m.def("build_pseudo_embeddings", &synth::build_pseudo_embeddings, py::arg("names"), py::arg("dim"), py::arg("seed") = 0);

  py::class_<network::Model>(m, "Model")
      .def(py::init<const network::ModelConfig&, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def_property_readonly("config", &network::Model::config)
      .def_property_readonly("num_parameters",
                             [](const network::Model& mdl) { return mdl.parameters().scalar_count(); })
      .def(
          "predict",
          [](const network::Model& mdl, const Array& image, const sasp::SceneEmbeddingTable* table) {
            return prediction_dict(network::predict_padded(mdl, to_image(image), table), table);
          },
          py::arg("image"), py::arg("table") = nullptr,
          "Metric and relative depth for an (H, W, 3) image in [0, 1]; any size is reflect-padded to a multiple of 32")
      .def("save", [](const network::Model& mdl, const std::filesystem::path& p) { checkpoint::save_model(mdl, p); })
      .def_static("load", &checkpoint::load_model);

  m.def("bin_centers", &arde::bin_centers, py::arg("lengths"));
  m.def("normalize_lengths", py::overload_cast<const Vec&>(&arde::normalize_lengths), py::arg("raw"));

  m.def(
      "si_loss",
      [](const Mat& relative, const Mat& metric, const Mat& gt,
         std::optional<py::array_t<bool, py::array::c_style | py::array::forcecast>> valid, double alpha, double lambda) {
        losses::LossConfig cfg;
        cfg.alpha = alpha;
        cfg.lambda = lambda;
        return losses::si_loss(DepthMap::dense(relative, DepthKind::Relative), DepthMap::dense(metric, DepthKind::Metric),
                               depth_map(gt, valid, DepthKind::Metric), cfg);
      },
      py::arg("relative"), py::arg("metric"), py::arg("gt"), py::arg("valid") = py::none(), py::arg("alpha") = 10.0,
      py::arg("lambda_") = 0.15);

  m.def(
      "evaluate",
      [](const Mat& pred, const Mat& gt, std::optional<py::array_t<bool, py::array::c_style | py::array::forcecast>> valid,
         double min_depth, double max_depth) {
        return report_dict(metrics::evaluate(pred, depth_map(gt, valid, DepthKind::Metric), ValidityPolicy{min_depth, max_depth}));
      },
      py::arg("pred"), py::arg("gt"), py::arg("valid") = py::none(), py::arg("min_depth") = 1e-3,
      py::arg("max_depth") = 10.0);

  py::class_<synth::Sample>(m, "Sample")
      .def_property_readonly("image", [](const synth::Sample& s) { return from_image(s.image); })
      .def_property_readonly("depth", [](const synth::Sample& s) { return s.depth.values(); })
      .def_property_readonly("valid", [](const synth::Sample& s) { return from_mask(s.depth.valid()); })
      .def_readonly("category", &synth::Sample::category);
  m.def(
      "default_categories",
      [] {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& c : synth::default_categories()) out.emplace_back(c.name, c.scale_family);
        return out;
      });
  m.def(
      "generate",
      [](const std::string& category, double scale_family, std::uint64_t seed, int height, int width,
         std::vector<std::string> categories) {
        if (categories.empty())
          for (const auto& c : synth::default_categories()) categories.push_back(c.name);
        return synth::generate(synth::SceneSpec{category, scale_family, seed, height, width}, categories);
      },
      py::arg("category"), py::arg("scale_family"), py::arg("seed"), py::arg("height") = 64, py::arg("width") = 64,
      py::arg("categories") = std::vector<std::string>{});

  m.def(
      "save_depth_png",
      [](const Mat& depth, std::optional<py::array_t<bool, py::array::c_style | py::array::forcecast>> valid,
         const std::filesystem::path& path, double divisor) {
        save_depth_png(depth_map(depth, valid, DepthKind::Metric), path, divisor);
      },
      py::arg("depth"), py::arg("valid"), py::arg("path"), py::arg("divisor") = synth::kDepthDivisor);
  m.def(
      "load_depth_png",
      [](const std::filesystem::path& path, double divisor) {
        DepthMap d = load_depth_png(path, divisor);
        return py::make_tuple(d.values(), from_mask(d.valid()));
      },
      py::arg("path"), py::arg("divisor") = synth::kDepthDivisor);

  py::class_<train::TrainConfig>(m, "TrainConfig")
      .def_static("from_ini", &train::TrainConfig::from_ini_text, py::arg("text"))
      .def("to_ini", &train::TrainConfig::to_ini)
      .def_readwrite("model", &train::TrainConfig::model)
      .def_readwrite("iterations", &train::TrainConfig::iterations)
      .def_readwrite("batch_size", &train::TrainConfig::batch_size)
      .def_readwrite("seed", &train::TrainConfig::seed);

  // The trainer keeps a pointer to the table, so the Python object holds it alive.
  py::class_<train::Trainer>(m, "Trainer")
      .def(py::init<const train::TrainConfig&, const sasp::SceneEmbeddingTable*>(), py::arg("config"),
           py::arg("table") = nullptr, py::keep_alive<1, 3>())
      .def_property_readonly("model", py::overload_cast<>(&train::Trainer::model), py::return_value_policy::reference_internal)
      .def_property_readonly("iteration", &train::Trainer::iteration)
      .def(
          "step",
          [](train::Trainer& t, const std::vector<synth::Sample>& batch) {
            train::StepLog l = t.step(batch);
            return py::make_tuple(l.si, l.ti, l.total);
          },
          py::arg("batch"))
      .def(
          "fit",
          [](train::Trainer& t, const std::vector<synth::Sample>& data) {
            std::vector<std::tuple<double, double, double>> out;
            t.fit(data, [&](const train::StepLog& l) { out.emplace_back(l.si, l.ti, l.total); });
            return out;
          },
          py::arg("data"))
      .def("save", &train::Trainer::save)
      .def("resume", &train::Trainer::resume);
}
