/*
 * Copyright 2026 The shortcut-lens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "slens/cli.hpp"
#include "slens/corpus.hpp"
#include "slens/errors.hpp"
#include "slens/evaluation.hpp"
#include "slens/shortcut.hpp"
#include "slens/training.hpp"

namespace py = pybind11;
using namespace slens;
using nlohmann::json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

// (N, C, H, W) images plus labels and ids into a dataset.
LabeledDataset dataset_from(const FloatArray& images, const LabelArray& labels,
                            std::vector<std::string> ids, int num_classes) {
  if (images.ndim() != 4) throw ContractError("images must have shape (N, C, H, W)");
  const auto n = images.shape(0);
  if (labels.ndim() != 1 || labels.shape(0) != n)
    throw ContractError("labels must have shape (N,)");
  if (ids.empty())
    for (py::ssize_t i = 0; i < n; ++i) ids.push_back("img/" + std::to_string(i));
  if (static_cast<py::ssize_t>(ids.size()) != n) throw ContractError("need one id per image");
  LabeledDataset d;
  for (int k = 0; k < num_classes; ++k) d.class_names.push_back("class" + std::to_string(k));
  const int c = images.shape(1), h = images.shape(2), w = images.shape(3);
  const float* src = images.data();
  auto lab = labels.unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    Image img(c, h, w);
    std::copy(src + i * img.data.size(), src + (i + 1) * img.data.size(), img.data.begin());
    if (lab(i) < 0 || lab(i) >= num_classes) throw ContractError("label out of range");
    d.items.push_back({ids[i], static_cast<int>(lab(i)), std::move(img)});
  }
  return d;
}

FloatArray images_of(const LabeledDataset& d) {
  if (d.items.empty()) return FloatArray(std::vector<py::ssize_t>{0, 0, 0, 0});
  const Image& f = d.items.front().image;
  FloatArray out({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(f.channels),
                  static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width)});
  float* dst = out.mutable_data();
  for (const auto& item : d.items) dst = std::copy(item.image.data.begin(), item.image.data.end(), dst);
  return out;
}

torch::Tensor tensor_of(const FloatArray& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

FloatArray array_of(const torch::Tensor& t) {
  torch::Tensor c = t.detach().to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  FloatArray out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), c.numel() * sizeof(float));
  return out;
}

py::tuple desk_split(int classes, int per_class, int size, double noise, int clutter,
                     std::uint64_t seed, const std::string& split) {
  DeskCorpusOptions o;
  o.classes = classes;
  o.train_per_class = per_class;
  o.test_per_class = per_class;
  o.size = size;
  o.noise = noise;
  o.clutter = clutter;
  o.seed = seed;
  LabeledDataset d = generate_desk_split(o, split_from_string(split));
  LabelArray labels(static_cast<py::ssize_t>(d.size()));
  std::vector<std::string> ids;
  for (size_t i = 0; i < d.size(); ++i) {
    labels.mutable_at(i) = d.items[i].label;
    ids.push_back(d.items[i].id);
  }
  return py::make_tuple(images_of(d), labels, ids, d.class_names);
}

py::tuple inject(const FloatArray& images, const LabelArray& labels,
                 const std::vector<std::string>& ids, const std::string& spec_json) {
  ShortcutSpec spec = shortcut_spec_from_json(json::parse(spec_json));
  ShortcutDataset sd = build_shortcut_dataset(dataset_from(images, labels, ids, spec.num_classes), spec);
  return py::make_tuple(images_of(sd.dataset), to_json(sd.manifest).dump());
}

FloatArray replay_manifest(const std::string& manifest_json, const FloatArray& images,
                           const LabelArray& labels, const std::vector<std::string>& ids) {
  InjectionManifest m = manifest_from_json(json::parse(manifest_json));
  return images_of(replay(m, dataset_from(images, labels, ids, m.spec.num_classes)));
}

std::string train_run(const FloatArray& images, const LabelArray& labels, int num_classes,
                      const std::string& config_json, const std::string& out_dir, bool baseline) {
  ExperimentConfig cfg = experiment_config_from_json(json::parse(config_json));
  TensorDataset data = to_tensors(dataset_from(images, labels, {}, num_classes));
  TrainOptions opts;
  opts.out_dir = out_dir;
  py::gil_scoped_release release;
  TrainResult r = baseline ? train_baseline(data, cfg.classifier, cfg.train, opts)
                           : train(data, cfg.lens, cfg.classifier, cfg.train, opts);
  return r.history.to_ndjson();
}

double checkpoint_accuracy(const std::string& path, const FloatArray& images,
                           const LabelArray& labels) {
  Classifier clf = load_classifier(path);
  return accuracy(clf, to_tensors(dataset_from(images, labels, {}, clf->config().num_classes)));
}

FloatArray checkpoint_gradcam(const std::string& path, const FloatArray& image, int target) {
  Classifier clf = load_classifier(path);
  if (image.ndim() != 3) throw ContractError("image must have shape (C, H, W)");
  torch::Tensor x = tensor_of(image).unsqueeze(0);
  torch::Tensor maps;
  {
    py::gil_scoped_release release;
    maps = gradcam_batch(clf, x, {target});
  }
  return array_of(maps[0]);
}

py::dict apply_lens(const std::string& path, const FloatArray& images) {
  Lens lens = load_lens(path);
  lens->eval();
  torch::NoGradGuard ng;
  LensOutput o = lens->forward(tensor_of(images));
  py::dict d;
  d["attention"] = array_of(o.attention);
  d["replacement"] = array_of(o.replacement);
  d["image"] = array_of(o.image);
  return d;
}

py::tuple cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"slens"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shortcut injection and adversarial lens training (native core)";

  static py::exception<Error> validation_error(m, "ValidationError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(e.is_validation() ? validation_error.ptr() : PyExc_RuntimeError, e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(validation_error.ptr(), e.what());
    }
  });

  m.def("version", [] { return std::string(version_string()); });
  m.def("desk_split", &desk_split, py::arg("classes") = 10, py::arg("per_class") = 500,
        py::arg("size") = 32, py::arg("noise") = 0.15, py::arg("clutter") = 3,
        py::arg("seed") = 1, py::arg("split") = "train");
  m.def("inject", &inject, py::arg("images"), py::arg("labels"), py::arg("ids"),
        py::arg("spec_json"));
  m.def("replay", &replay_manifest, py::arg("manifest_json"), py::arg("images"),
        py::arg("labels"), py::arg("ids"));
  m.def("normalize_spec", [](const std::string& s, int h, int w) {
    ShortcutSpec spec = with_defaults(shortcut_spec_from_json(json::parse(s)), h, w);
    validate(spec, h, w);
    return to_json(spec).dump();
  });
  m.def("normalize_config", [](const std::string& s) {
    return to_json(experiment_config_from_json(json::parse(s))).dump();
  });
  m.def("compose", [](const FloatArray& i, const FloatArray& a, const FloatArray& r) {
    return array_of(compose(tensor_of(i), tensor_of(a), tensor_of(r)));
  });
  m.def("reproduction_loss", [](const FloatArray& a, double rho) {
    return reproduction_loss(tensor_of(a).to(torch::kFloat64), rho).item<double>();
  });
  m.def("train", &train_run, py::arg("images"), py::arg("labels"), py::arg("num_classes"),
        py::arg("config_json"), py::arg("out_dir"), py::arg("baseline") = false);
  m.def("accuracy", &checkpoint_accuracy, py::arg("classifier_path"), py::arg("images"),
        py::arg("labels"));
  m.def("gradcam", &checkpoint_gradcam, py::arg("classifier_path"), py::arg("image"),
        py::arg("target") = -1);
  m.def("apply_lens", &apply_lens, py::arg("lens_path"), py::arg("images"));
  m.def("cli", &cli, py::arg("args"));
}
