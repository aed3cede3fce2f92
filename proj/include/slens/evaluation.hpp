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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "slens/classifier.hpp"
#include "slens/image.hpp"
#include "slens/lens.hpp"
#include "slens/shortcut.hpp"
#include "slens/training.hpp"

namespace slens {

// Top-1 accuracy of raw images fed straight to the classifier.
double accuracy(Classifier& classifier, const TensorDataset& data);
std::vector<double> per_class_accuracy(Classifier& classifier, const TensorDataset& data);

// Normal-approximation half width, 1.96 * sample sd / sqrt(n). Zero for n < 2.
double ci95_halfwidth(const std::vector<double>& values);
double mean_of(const std::vector<double>& values);

struct EvalReport {
  double clean_accuracy = 0.0;
  std::optional<double> shortcut_accuracy;
  std::vector<double> per_class_accuracy;
  std::optional<double> mean_attention;
  int runs = 1;
  std::optional<double> ci95_halfwidth;  // only when runs >= 2
  std::vector<double> run_accuracies;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

// Train and test sets of one protocol. The shortcut test set may be empty.
struct ExperimentData {
  TensorDataset clean_train;
  TensorDataset shortcut_train;
  TensorDataset clean_test;
  TensorDataset shortcut_test;
};

struct MatrixCell {
  std::string train_set;  // "clean" or "shortcut"
  bool lens = false;
  EvalReport report;
};

struct EvalMatrix {
  std::vector<MatrixCell> cells;  // always four
  const MatrixCell& cell(const std::string& train_set, bool lens) const;
  std::string format_table() const;
};

nlohmann::json to_json(const EvalMatrix& m);

using ProgressFn = std::function<void(const std::string&)>;

// Seed of run `run` of a protocol with top-level seed `seed`.
std::uint64_t run_seed(std::uint64_t seed, int run);

// One cell: `runs` trainings with derived seeds, evaluated on the clean
// test set (and the shortcut test set when it is non-empty).
EvalReport evaluate_cell(const TensorDataset& train_set, const TensorDataset& clean_test,
                         const TensorDataset& shortcut_test, const ExperimentConfig& config,
                         bool with_lens, int runs, const ProgressFn& progress = {});

// {clean, shortcut} train x {with, without} lens.
EvalMatrix eval_matrix(const ExperimentData& data, const ExperimentConfig& config, int runs,
                       const ProgressFn& progress = {});

struct SweepRow {
  double rho = 0.0;
  double mean = 0.0;
  double error = 0.0;  // 95% half width, 0 for one run
  std::vector<double> accuracies;
};

std::vector<SweepRow> rho_sweep(const std::vector<double>& rhos, const TensorDataset& train_set,
                                const TensorDataset& clean_test, const ExperimentConfig& config,
                                int runs, const ProgressFn& progress = {});

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_csv(const std::string& text);

// Heatmap at input resolution, nonnegative, max-normalized to 1 (all zero
// when the rectified map vanishes).
struct CamHeatmap {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  std::pair<int, int> argmax() const;  // (y, x)
};

CamHeatmap gradcam(Classifier& classifier, const torch::Tensor& image, int target_class);
// Batched form, (N, H, W). `targets` of -1 select the predicted class.
torch::Tensor gradcam_batch(Classifier& classifier, const torch::Tensor& images,
                            const std::vector<int>& targets);
Image heatmap_image(const CamHeatmap& cam);

// Rows: input, lens output, |I - I'| normalized per image, attention mask.
Image visualize_lens(Lens& lens, const torch::Tensor& images);

// Footprint masks (N, H, W) for the given ids, all zero where the shortcut
// was not applied.
torch::Tensor footprint_masks(const InjectionManifest& manifest,
                              const std::vector<std::string>& ids);

// Share of sum |I - I'| falling on mask pixels.
double difference_mass_inside(const torch::Tensor& images, const torch::Tensor& lensed,
                              const torch::Tensor& masks);

// Share of heatmaps whose argmax lies on a mask pixel.
double argmax_inside_rate(const torch::Tensor& heatmaps, const torch::Tensor& masks);

// Batch-mean attention of the lens in inference mode.
double mean_attention(Lens& lens, const torch::Tensor& images);

}  // namespace slens
