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

#include "slens/lens.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"

namespace slens {

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using nlohmann::json;

std::string to_string(OutputActivation a) {
  return a == OutputActivation::unit_interval_squash ? "unit_interval_squash"
                                                     : "image_range";
}

OutputActivation output_activation_from_string(const std::string& name) {
  if (name == "unit_interval_squash") return OutputActivation::unit_interval_squash;
  if (name == "image_range") return OutputActivation::image_range;
  throw ConfigError("output_activation", "unknown activation '" + name + "'");
}

namespace {

void check_unet(const UNetConfig& c, const std::string& field) {
  if (c.downsampling_steps < 1)
    throw ConfigError(field + ".downsampling_steps", "must be >= 1");
  if (c.downsampling_steps > 8)
    throw ConfigError(field + ".downsampling_steps", "must be <= 8");
  if (c.base_channels < 1) throw ConfigError(field + ".base_channels", "must be >= 1");
  if (c.output_channels < 1)
    throw ConfigError(field + ".output_channels", "must be >= 1");
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& field, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, "wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "config" : prefix, "expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(prefix.empty() ? k : prefix + "." + k, "unknown key");
  }
}

}  // namespace

void LensConfig::validate(int image_channels) const {
  check_unet(attention, "attention");
  check_unet(replacement, "replacement");
  if (attention.output_channels != 1)
    throw ConfigError("attention.output_channels", "attention mask must have 1 channel");
  if (image_channels > 0 && replacement.output_channels != image_channels)
    throw ConfigError("replacement.output_channels",
                      "must equal the image channel count " + std::to_string(image_channels));
  if (attention.downsampling_steps > replacement.downsampling_steps)
    throw ConfigError("attention.downsampling_steps",
                      "attention may not be deeper than the replacement network");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  if (!(lambda_repr >= 0.0)) throw ConfigError("lambda_repr", "must be >= 0");
}

json to_json(const UNetConfig& c) {
  return json{{"downsampling_steps", c.downsampling_steps},
              {"base_channels", c.base_channels},
              {"output_channels", c.output_channels},
              {"output_activation", to_string(c.output_activation)},
              {"output_bias", c.output_bias},
              {"batch_norm", c.batch_norm}};
}

UNetConfig unet_config_from_json(const json& j, const std::string& field,
                                 UNetConfig c) {
  reject_unknown(j, {"downsampling_steps", "base_channels", "output_channels",
                     "output_activation", "output_bias", "batch_norm"}, field);
  c.downsampling_steps = get_field(j, "downsampling_steps", field + ".downsampling_steps", c.downsampling_steps);
  c.base_channels = get_field(j, "base_channels", field + ".base_channels", c.base_channels);
  c.output_channels = get_field(j, "output_channels", field + ".output_channels", c.output_channels);
  if (j.contains("output_activation")) {
    try {
      c.output_activation = output_activation_from_string(
          get_field<std::string>(j, "output_activation", field + ".output_activation", ""));
    } catch (const ConfigError& e) {
      throw ConfigError(field + ".output_activation", e.what());
    }
  }
  c.output_bias = get_field(j, "output_bias", field + ".output_bias", c.output_bias);
  c.batch_norm = get_field(j, "batch_norm", field + ".batch_norm", c.batch_norm);
  return c;
}

json to_json(const LensConfig& c) {
  return json{{"attention", to_json(c.attention)},
              {"replacement", to_json(c.replacement)},
              {"rho", c.rho},
              {"lambda_repr", c.lambda_repr}};
}

LensConfig lens_config_from_json(const json& j) {
  reject_unknown(j, {"attention", "replacement", "rho", "lambda_repr"}, "lens");
  LensConfig c;
  if (j.contains("attention"))
    c.attention = unet_config_from_json(j.at("attention"), "attention", c.attention);
  if (j.contains("replacement"))
    c.replacement = unet_config_from_json(j.at("replacement"), "replacement", c.replacement);
  c.rho = get_field(j, "rho", "rho", c.rho);
  c.lambda_repr = get_field(j, "lambda_repr", "lambda_repr", c.lambda_repr);
  return c;
}

nn::Sequential UNetImpl::block(int in, int out) {
  nn::Sequential s;
  s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
  if (config_.batch_norm) s->push_back(nn::BatchNorm2d(out));
  s->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  return s;
}

UNetImpl::UNetImpl(const UNetConfig& config, int input_channels)
    : config_(config), input_channels_(input_channels) {
  check_unet(config, "unet");
  if (input_channels < 1) throw ConfigError("input_channels", "must be >= 1");
  std::vector<int> ch;
  for (int i = 0; i <= config.downsampling_steps; ++i) ch.push_back(config.base_channels << i);
  inc_ = register_module("inc", block(input_channels, ch[0]));
  down_ = register_module("down", nn::ModuleList());
  up_ = register_module("up", nn::ModuleList());
  for (int i = 0; i < config.downsampling_steps; ++i) {
    down_->push_back(block(ch[i], ch[i + 1]));
    up_->push_back(block(ch[i + 1] + ch[i], ch[i]));
  }
  out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(ch[0], config.output_channels, 1)));
  torch::NoGradGuard guard;
  out_->bias.fill_(config.output_bias);
}

torch::Tensor UNetImpl::logits(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != input_channels_)
    throw ConfigError("input", "expected (N, " + std::to_string(input_channels_) +
                                   ", H, W), got " + c10::str(x.sizes()));
  const int64_t h = x.size(2), w = x.size(3);
  const int64_t m = int64_t{1} << config_.downsampling_steps;
  const int64_t ph = (m - h % m) % m, pw = (m - w % m) % m;
  torch::Tensor in = x;
  if (ph || pw)
    in = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));

  std::vector<torch::Tensor> skips{inc_->forward(in)};
  for (size_t i = 0; i < down_->size(); ++i)
    skips.push_back(down_[i]->as<nn::Sequential>()->forward(F::max_pool2d(skips.back(), F::MaxPool2dFuncOptions(2))));
  torch::Tensor y = skips.back();
  for (int i = static_cast<int>(up_->size()) - 1; i >= 0; --i) {
    y = F::interpolate(y, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kNearest));
    y = up_[i]->as<nn::Sequential>()->forward(torch::cat({y, skips[i]}, 1));
  }
  y = out_->forward(y);
  if (ph || pw) y = y.slice(2, 0, h).slice(3, 0, w);
  return y;
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

LensImpl::LensImpl(const LensConfig& config, int image_channels)
    : config_(config), image_channels_(image_channels) {
  config.validate(image_channels);
  attention_ = register_module("attention", UNet(config.attention, image_channels));
  replacement_ = register_module("replacement", UNet(config.replacement, image_channels));
}

LensOutput LensImpl::forward(const torch::Tensor& images) {
  LensOutput out;
  out.attention = attention_->forward(images);
  out.replacement = replacement_->forward(images);
  out.image = compose(images, out.attention, out.replacement);
  return out;
}

torch::Tensor compose(const torch::Tensor& images, const torch::Tensor& attention,
                      const torch::Tensor& replacement) {
  if (images.dim() != 4 || attention.dim() != 4 || replacement.dim() != 4)
    throw ContractError("compose: operands must be rank 4");
  if (!images.sizes().equals(replacement.sizes()))
    throw ContractError("compose: replacement " + c10::str(replacement.sizes()) +
                        " does not match images " + c10::str(images.sizes()));
  if (attention.size(0) != images.size(0) || attention.size(2) != images.size(2) ||
      attention.size(3) != images.size(3) ||
      (attention.size(1) != 1 && attention.size(1) != images.size(1)))
    throw ContractError("compose: attention " + c10::str(attention.sizes()) +
                        " does not broadcast to images " + c10::str(images.sizes()));
  return attention * replacement + (1 - attention) * images;
}

torch::Tensor attention_mass(const torch::Tensor& attention) {
  return attention.flatten(1).mean(1);
}

torch::Tensor reproduction_loss(const torch::Tensor& attention, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  if (attention.dim() < 2) throw ContractError("reproduction_loss: expected a batch of masks");
  return (torch::clamp_min(attention_mass(attention), rho) - rho).mean();
}

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(const std::filesystem::path&)>& write) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write(tmp);
    fs::rename(tmp, path);
  } catch (const Error&) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError(path.string(), e.what());
  }
}

void save_lens(Lens& lens, const std::filesystem::path& path) {
  json cfg = to_json(lens->config());
  cfg["image_channels"] = lens->image_channels();
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    torch::serialize::OutputArchive archive;
    lens->save(archive);
    archive.write("lens_config", c10::IValue(cfg.dump()));
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

Lens load_lens(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(path.string(), "no such checkpoint");
  torch::serialize::InputArchive archive;
  c10::IValue text;
  try {
    archive.load_from(path.string());
    archive.read("lens_config", text);
  } catch (const c10::Error& e) {
    throw IoError(path.string(), "not a lens checkpoint");
  }
  json cfg = json::parse(text.toStringRef());
  int channels = cfg.at("image_channels").get<int>();
  cfg.erase("image_channels");
  Lens lens(lens_config_from_json(cfg), channels);
  lens->load(archive);
  return lens;
}

}  // namespace slens
