/*
 * Copyright 2026 The genclass Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings: preprocessing, SRM residuals, losses, metrics, PRNU, and
// inference with saved checkpoints and template libraries.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <string>
#include <vector>

#include "genclass/errors.hpp"
#include "genclass/imaging.hpp"
#include "genclass/losses.hpp"
#include "genclass/metrics.hpp"
#include "genclass/model.hpp"
#include "genclass/prnu.hpp"
#include "genclass/srm.hpp"
#include "genclass/til.hpp"

namespace py = pybind11;
using namespace genclass;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageTensor to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("image must be an H x W x 3 array");
  ImageTensor img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

FloatArray from_image(const ImageTensor& img) {
  FloatArray out({img.height, img.width, img.channels});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

FloatArray from_residual(const srm::ResidualTensor& r) {
  FloatArray out({r.channels, r.height, r.width});
  std::copy(r.values.begin(), r.values.end(), out.mutable_data());
  return out;
}

py::dict to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

/// Loaded checkpoint plus its restored model.
class Model {
 public:
  explicit Model(const std::filesystem::path& path) : checkpoint_(Checkpoint::load(path)), model_(checkpoint_.restore()) {}

  const std::vector<std::string>& classes() const { return checkpoint_.classes; }
  std::string version() const { return model_.version(); }
  int embedding_dim() const { return model_.config().embedding_dim; }
  int input_size() const { return model_.config().input_size; }

  /// Embeddings of N x H x W x 3 preprocessed raw_0_255 images.
  EmbeddingMatrix embed(const FloatArray& images) const {
    if (images.ndim() != 4 || images.shape(3) != 3) throw ShapeError("images must be an N x H x W x 3 array");
    const auto n = images.shape(0), h = images.shape(1), w = images.shape(2);
    std::vector<srm::ResidualTensor> residuals;
    residuals.reserve(n);
    for (py::ssize_t i = 0; i < n; ++i) {
      ImageTensor img(static_cast<int>(h), static_cast<int>(w));
      const float* src = images.data() + i * h * w * 3;
      std::copy(src, src + h * w * 3, img.pixels.begin());
      residuals.push_back(srm::srm_residuals(img));
    }
    py::gil_scoped_release release;
    return embed_residuals(model_, residuals);
  }

  EmbeddingModel& model() { return model_; }

 private:
  Checkpoint checkpoint_;
  EmbeddingModel model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "genclass native core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  static std::map<std::string, PyObject*> errors;
  errors["Error"] = base.ptr();
  for (const char* name : {"ArgumentError", "ConfigError", "DecodeError", "DegenerateLabelsError",
                           "DegenerateResidualError", "DuplicateClassError", "EmptyClassError", "EmptyLibraryError",
                           "EmptyTripletError", "FormatError", "LabelError", "ManifestError", "RangeError",
                           "ShapeError", "VersionError", "DivergenceError"}) {
    py::object type = py::reinterpret_steal<py::object>(
        PyErr_NewException((std::string("genclass._core.") + name).c_str(), base.ptr(), nullptr));
    m.attr(name) = type;
    errors[name] = type.release().ptr();
  }
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const auto it = errors.find(e.name());
      PyErr_SetString(it != errors.end() ? it->second : errors.at("Error"), e.what());
    }
  });

  m.attr("INPUT_SIZE") = kInputSize;

  m.def("decode_image", [](const std::filesystem::path& p) { return from_image(decode_image(p)); }, py::arg("path"),
        "Decodes an image file to an H x W x 3 float32 RGB array in [0, 255].");
  m.def("preprocess", [](const FloatArray& a, int size) { return from_image(preprocess(to_image(a), size)); },
        py::arg("image"), py::arg("size") = kInputSize, "Center crop and bilinear resize.");
  m.def("load_and_preprocess", [](const std::filesystem::path& p, int size) {
        return from_image(load_and_preprocess(p, size));
      }, py::arg("path"), py::arg("size") = kInputSize);

  m.def("srm_residuals", [](const FloatArray& a) { return from_residual(srm::srm_residuals(to_image(a))); },
        py::arg("image"), "Residual maps (3, 128, 128) of a preprocessed image.");
  m.def("kernel_bank", [] { return to_py(srm::kernel_bank().to_json()); });

  m.def("build_manifest", [](const std::filesystem::path& root, int train, int test, std::uint64_t seed,
                             const std::string& real_class) {
        ManifestOptions o;
        o.default_split = {train, test};
        o.seed = seed;
        o.real_class = real_class;
        return to_py(build_manifest(root, o).to_json());
      }, py::arg("root"), py::arg("train") = 10000, py::arg("test") = 100, py::arg("seed") = 0,
      py::arg("real_class") = "");

  m.def("center_loss", [](const losses::Matrix& emb, const std::vector<int>& labels, const losses::Matrix& centers) {
        losses::ClassCenters c;
        c.centers = centers;
        return losses::center_loss(emb, labels, c);
      }, py::arg("embeddings"), py::arg("labels"), py::arg("centers"));
  m.def("cross_entropy", [](const losses::Matrix& logits, const std::vector<int>& labels) {
        return losses::cross_entropy(logits, labels);
      }, py::arg("logits"), py::arg("labels"));
  m.def("triplet_loss", &losses::triplet_loss, py::arg("anchor"), py::arg("positive"), py::arg("negative"),
        py::arg("margin") = 0.2);
  m.def("all_valid_triplet_count", [](const std::vector<int>& labels) {
        return losses::all_valid_triplet_count(labels);
      }, py::arg("labels"));

  m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return metrics::auroc(scores, labels);
      }, py::arg("scores"), py::arg("labels"));
  m.def("top1_accuracy", [](const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
        return metrics::top1_accuracy(pred, truth);
      }, py::arg("predictions"), py::arg("truth"));

  m.def("prnu_residual", [](const FloatArray& a) { return prnu::extract_residual(to_image(a)); }, py::arg("image"));
  m.def("normalized_correlation", &prnu::normalized_correlation, py::arg("a"), py::arg("b"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("path"))
      .def_property_readonly("classes", &Model::classes)
      .def_property_readonly("version", &Model::version)
      .def_property_readonly("embedding_dim", &Model::embedding_dim)
      .def_property_readonly("input_size", &Model::input_size)
      .def("embed", &Model::embed, py::arg("images"));

  py::class_<til::Prediction>(m, "Prediction")
      .def_readonly("label", &til::Prediction::label)
      .def_readonly("distances", &til::Prediction::distances);

  py::class_<til::TemplateLibrary>(m, "TemplateLibrary")
      .def_static("load", &til::TemplateLibrary::load, py::arg("path"))
      .def("save", &til::TemplateLibrary::save, py::arg("path"))
      .def_property_readonly("labels", &til::TemplateLibrary::labels)
      .def_property_readonly("model_version", &til::TemplateLibrary::model_version)
      .def("__len__", &til::TemplateLibrary::size)
      .def("classify", [](const til::TemplateLibrary& t, const std::vector<float>& q) { return t.classify(q); },
           py::arg("embedding"))
      .def("add_class", [](const til::TemplateLibrary& t, Model& model, const std::string& label, const FloatArray& a) {
             return til::add_class(t, label, to_image(a), model.model());
           }, py::arg("model"), py::arg("label"), py::arg("image"));
}
