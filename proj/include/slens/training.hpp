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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "slens/classifier.hpp"
#include "slens/image.hpp"
#include "slens/lens.hpp"

namespace slens {

// Identity forward, negated gradient backward.
torch::Tensor gradient_reversal(const torch::Tensor& x);

enum class LrSchedule { constant, cosine };
std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& name);

struct TrainConfig {
  double classifier_lr = 2e-3;
  double lens_lr = 1e-3;
  int epochs = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
  bool dual_path = true;
  double lambda_repr = 15.0;  // same value as LensConfig::lambda_repr
  int checkpoint_every = 0;   // epochs between checkpoints, 0 = only at the end
  double direct_weight = 1.0;  // weight of CE(direct) in the classifier objective
  LrSchedule lr_schedule = LrSchedule::cosine;
  bool deterministic = false;  // one intra-op thread

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// The three configs of one run, serialized as a single flat JSON object.
// lambda_repr is shared by the lens and train parts.
struct ExperimentConfig {
  LensConfig lens;
  ClassifierConfig classifier;
  TrainConfig train;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct EpochRecord {
  int epoch = 0;
  std::optional<double> ce_lensed;
  std::optional<double> ce_direct;
  std::optional<double> repr;
  std::optional<double> attention_mass;
  double train_accuracy = 0.0;
  double classifier_lr = 0.0;
  double lens_lr = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_ndjson() const;
  static TrainHistory from_ndjson(const std::string& text);
  void write(const std::filesystem::path& path) const;
  bool operator==(const TrainHistory&) const = default;
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

// Whole dataset as tensors: images (N, C, H, W) float32, labels (N) int64.
struct TensorDataset {
  torch::Tensor images;
  torch::Tensor labels;
  std::vector<std::string> ids;
  int num_classes = 0;

  int64_t size() const { return images.defined() ? images.size(0) : 0; }
};

TensorDataset to_tensors(const LabeledDataset& dataset);
Image image_from_tensor(const torch::Tensor& chw);

struct StepLosses {
  torch::Tensor total;
  torch::Tensor ce_lensed;  // undefined for baseline steps
  torch::Tensor ce_direct;  // undefined when dual_path is off
  torch::Tensor repr;       // undefined for baseline steps
  torch::Tensor mass;       // batch-mean attention, undefined for baseline steps
  torch::Tensor logits;     // direct logits when present, else lensed logits
};

// Builds the joint objective lambda * L_repr + CE(C(GRL(I'))) + w * CE(C(I)).
// `lens` may be empty for a classifier-only objective.
StepLosses forward_losses(const torch::Tensor& images, const torch::Tensor& labels, Lens* lens,
                          Classifier& classifier, double rho, const TrainConfig& config);

struct Optimizers {
  std::unique_ptr<torch::optim::Adam> lens;
  std::unique_ptr<torch::optim::Adam> classifier;
};

Optimizers make_optimizers(Lens* lens, Classifier& classifier, const TrainConfig& config);

struct StepOptions {
  bool update_lens = true;
  bool update_classifier = true;
  int64_t step_index = 0;
};

// One backward pass through the joint graph, then both optimizers step.
// Throws TrainingError if any loss component is not finite.
StepLosses training_step(const torch::Tensor& images, const torch::Tensor& labels, Lens* lens,
                         Classifier& classifier, Optimizers& optimizers, double rho,
                         const TrainConfig& config, const StepOptions& options = {});

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Classifier classifier{nullptr};
  Lens lens{nullptr};  // null for baselines
  TrainHistory history;
};

TrainResult train(const TensorDataset& data, const LensConfig& lens_config,
                  const ClassifierConfig& classifier_config, const TrainConfig& config,
                  const TrainOptions& options = {});

TrainResult train_baseline(const TensorDataset& data, const ClassifierConfig& classifier_config,
                           const TrainConfig& config, const TrainOptions& options = {});

}  // namespace slens
