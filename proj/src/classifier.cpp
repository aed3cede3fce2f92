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

#include "slens/classifier.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"
#include "slens/lens.hpp"

namespace slens {

namespace nn = torch::nn;
using nlohmann::json;

std::string to_string(Architecture a) {
  return a == Architecture::small_resnet ? "small_resnet" : "resnet18";
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "small_resnet") return Architecture::small_resnet;
  if (name == "resnet18") return Architecture::resnet18;
  throw ConfigError("architecture", "unknown architecture '" + name + "'");
}

void ClassifierConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes", "must be >= 2");
  if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("width", "must be > 0");
  if (input_channels < 1) throw ConfigError("input_channels", "must be >= 1");
}

json to_json(const ClassifierConfig& c) {
  return json{{"architecture", to_string(c.architecture)},
              {"num_classes", c.num_classes},
              {"width", c.width},
              {"input_channels", c.input_channels}};
}

ClassifierConfig classifier_config_from_json(const json& j) {
  ClassifierConfig c;
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "architecture") c.architecture = architecture_from_string(v.get<std::string>());
      else if (k == "num_classes") c.num_classes = v.get<int>();
      else if (k == "width") c.width = v.get<double>();
      else if (k == "input_channels") c.input_channels = v.get<int>();
      else throw ConfigError(k, "unknown key");
    } catch (const json::exception&) {
      throw ConfigError(k, "wrong type");
    }
  }
  return c;
}

BasicBlockImpl::BasicBlockImpl(int in, int out, int stride) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
  bn1_ = register_module("bn1", nn::BatchNorm2d(out));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1).bias(false)));
  bn2_ = register_module("bn2", nn::BatchNorm2d(out));
  shortcut_ = register_module("shortcut", nn::Sequential());
  if (stride != 1 || in != out) {
    shortcut_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)));
    shortcut_->push_back(nn::BatchNorm2d(out));
  }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1_->forward(conv1_->forward(x)));
  y = bn2_->forward(conv2_->forward(y));
  return torch::relu(y + (shortcut_->is_empty() ? x : shortcut_->forward(x)));
}

ClassifierImpl::ClassifierImpl(const ClassifierConfig& config) : config_(config) {
  config.validate();
  auto ch = [&](int c) { return std::max(1, static_cast<int>(std::lround(c * config.width))); };
  stem_ = register_module("stem", nn::Sequential());
  body_ = register_module("body", nn::Sequential());
  int last = 0;
  if (config.architecture == Architecture::small_resnet) {
    stem_->push_back(nn::Conv2d(nn::Conv2dOptions(config.input_channels, ch(16), 3).padding(1).bias(false)));
    stem_->push_back(nn::BatchNorm2d(ch(16)));
    stem_->push_back(nn::ReLU());
    stem_->push_back(nn::MaxPool2d(2));
    body_->push_back(BasicBlock(ch(16), ch(32), 1));
    body_->push_back(BasicBlock(ch(32), ch(64), 2));
    last = ch(64);
  } else {
    stem_->push_back(nn::Conv2d(nn::Conv2dOptions(config.input_channels, ch(64), 3).padding(1).bias(false)));
    stem_->push_back(nn::BatchNorm2d(ch(64)));
    stem_->push_back(nn::ReLU());
    int in = ch(64);
    const int widths[] = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
      for (int b = 0; b < 2; ++b) {
        body_->push_back(BasicBlock(in, ch(widths[s]), (s > 0 && b == 0) ? 2 : 1));
        in = ch(widths[s]);
      }
    }
    last = in;
  }
  fc_ = register_module("fc", nn::Linear(last, config.num_classes));
}

torch::Tensor ClassifierImpl::features(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.input_channels)
    throw ContractError("classifier: expected (N, " + std::to_string(config_.input_channels) +
                        ", H, W), got " + c10::str(x.sizes()));
  return body_->forward(stem_->forward(x));
}

torch::Tensor ClassifierImpl::head(const torch::Tensor& features) {
  return fc_->forward(features.mean({2, 3}));
}

void save_classifier(Classifier& model, const std::filesystem::path& path) {
  json cfg = to_json(model->config());
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    torch::serialize::OutputArchive archive;
    model->save(archive);
    archive.write("classifier_config", c10::IValue(cfg.dump()));
    archive.save_to(tmp.string());
  });
  std::filesystem::path side = path;
  side += ".json";
  write_atomically(side, [&](const std::filesystem::path& tmp) {
    std::ofstream os(tmp);
    os << cfg.dump(2) << "\n";
    if (!os) throw IoError(tmp.string(), "write failed");
  });
}

Classifier load_classifier(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(path.string(), "no such checkpoint");
  torch::serialize::InputArchive archive;
  c10::IValue text;
  try {
    archive.load_from(path.string());
    archive.read("classifier_config", text);
  } catch (const c10::Error&) {
    throw IoError(path.string(), "not a classifier checkpoint");
  }
  Classifier model(classifier_config_from_json(json::parse(text.toStringRef())));
  model->load(archive);
  return model;
}

}  // namespace slens
