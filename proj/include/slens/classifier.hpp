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

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

namespace slens {

enum class Architecture { small_resnet, resnet18 };
std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& name);

struct ClassifierConfig {
  Architecture architecture = Architecture::small_resnet;
  int num_classes = 10;
  double width = 1.0;  // multiplies every channel count
  int input_channels = 3;

  void validate() const;
  bool operator==(const ClassifierConfig&) const = default;
};

nlohmann::json to_json(const ClassifierConfig& c);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in, int out, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(BasicBlock);

// small_resnet: 3x3 stem, 2x2 max pool, two basic blocks (the second with
// stride 2), global average pool. For 32x32 inputs the last feature map is
// 8x8. resnet18: the 3x3-stem variant common for 32x32 inputs, last map 4x4.
class ClassifierImpl : public torch::nn::Module {
 public:
  explicit ClassifierImpl(const ClassifierConfig& config);

  // Output of the final convolutional block.
  torch::Tensor features(const torch::Tensor& x);
  torch::Tensor head(const torch::Tensor& features);
  torch::Tensor forward(const torch::Tensor& x) { return head(features(x)); }

  const ClassifierConfig& config() const { return config_; }

 private:
  ClassifierConfig config_;
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential body_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(Classifier);

void save_classifier(Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace slens
