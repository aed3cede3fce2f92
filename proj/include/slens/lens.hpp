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
#include <functional>
#include <string>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

namespace slens {

enum class OutputActivation { unit_interval_squash, image_range };
std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& name);

struct UNetConfig {
  int downsampling_steps = 3;
  int base_channels = 4;  // doubled after every downsampling step
  int output_channels = 1;
  OutputActivation output_activation = OutputActivation::unit_interval_squash;
  double output_bias = 0.0;  // initial bias of the final 1x1 convolution
  bool batch_norm = true;

  bool operator==(const UNetConfig&) const = default;
};

struct LensConfig {
  UNetConfig attention{3, 4, 1, OutputActivation::unit_interval_squash, -4.0, true};
  UNetConfig replacement{5, 4, 3, OutputActivation::image_range, 0.0, true};
  double rho = 0.025;
  double lambda_repr = 15.0;

  // Throws ConfigError naming the offending field. `image_channels` <= 0
  // skips the replacement channel check.
  void validate(int image_channels = 0) const;
  bool operator==(const LensConfig&) const = default;
};

nlohmann::json to_json(const UNetConfig& c);
// Keys absent from `j` keep their value in `base`.
UNetConfig unet_config_from_json(const nlohmann::json& j, const std::string& field,
                                 UNetConfig base = {});
nlohmann::json to_json(const LensConfig& c);
LensConfig lens_config_from_json(const nlohmann::json& j);

// Encoder-decoder with a skip connection at every scale. Inputs whose sides
// are not multiples of 2^steps are replicate-padded and the output cropped.
class UNetImpl : public torch::nn::Module {
 public:
  UNetImpl(const UNetConfig& config, int input_channels);

  // Pre-activation output, (N, output_channels, H, W).
  torch::Tensor logits(const torch::Tensor& x);
  // logits squashed to [0, 1].
  torch::Tensor forward(const torch::Tensor& x);

  const UNetConfig& config() const { return config_; }
  int input_channels() const { return input_channels_; }

 private:
  torch::nn::Sequential block(int in, int out);

  UNetConfig config_;
  int input_channels_;
  torch::nn::Sequential inc_{nullptr};
  torch::nn::ModuleList down_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(UNet);

struct LensOutput {
  torch::Tensor attention;    // A, (N, 1, H, W)
  torch::Tensor replacement;  // R, (N, C, H, W)
  torch::Tensor image;        // I' = A R + (1 - A) I
};

class LensImpl : public torch::nn::Module {
 public:
  LensImpl(const LensConfig& config, int image_channels);

  LensOutput forward(const torch::Tensor& images);

  const LensConfig& config() const { return config_; }
  int image_channels() const { return image_channels_; }
  UNet attention() { return attention_; }
  UNet replacement() { return replacement_; }

 private:
  LensConfig config_;
  int image_channels_;
  UNet attention_{nullptr};
  UNet replacement_{nullptr};
};
TORCH_MODULE(Lens);

// I' = A R + (1 - A) I with A broadcast over channels. Throws ContractError
// on incompatible shapes.
torch::Tensor compose(const torch::Tensor& images, const torch::Tensor& attention,
                      const torch::Tensor& replacement);

// Batch mean of max(rho, mean(A_i)) - rho, one hinge per image.
torch::Tensor reproduction_loss(const torch::Tensor& attention, double rho);

// Mean attention per image, shape (N).
torch::Tensor attention_mass(const torch::Tensor& attention);

// Weights plus config in one archive; the config is also written as JSON
// to `path` + ".json".
void save_lens(Lens& lens, const std::filesystem::path& path);
Lens load_lens(const std::filesystem::path& path);

// Atomic replacement of `path` by whatever `write` produces at a temp path.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(const std::filesystem::path&)>& write);

}  // namespace slens
