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

#include "slens/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"
#include "slens/rng.hpp"

namespace slens {

using nlohmann::json;
namespace F = torch::nn::functional;

namespace {

constexpr int64_t kEvalBatch = 500;

torch::Tensor predictions(Classifier& classifier, const torch::Tensor& images) {
  torch::NoGradGuard guard;
  classifier->eval();
  std::vector<torch::Tensor> out;
  for (int64_t i = 0; i < images.size(0); i += kEvalBatch)
    out.push_back(classifier->forward(images.slice(0, i, i + kEvalBatch)).argmax(1));
  return torch::cat(out);
}

void check_classes(Classifier& classifier, const TensorDataset& data) {
  if (data.size() == 0) throw ConfigError("data", "evaluation set is empty");
  if (classifier->config().num_classes != data.num_classes)
    throw ConfigError("num_classes", "checkpoint has " +
                                         std::to_string(classifier->config().num_classes) +
                                         " classes, dataset has " +
                                         std::to_string(data.num_classes));
}

}  // namespace

double accuracy(Classifier& classifier, const TensorDataset& data) {
  check_classes(classifier, data);
  return predictions(classifier, data.images).eq(data.labels).to(torch::kFloat64).mean().item<double>();
}

std::vector<double> per_class_accuracy(Classifier& classifier, const TensorDataset& data) {
  check_classes(classifier, data);
  auto hit = predictions(classifier, data.images).eq(data.labels);
  std::vector<double> out;
  for (int k = 0; k < data.num_classes; ++k) {
    auto sel = data.labels.eq(k);
    int64_t n = sel.sum().item<int64_t>();
    out.push_back(n ? hit.logical_and(sel).sum().item<double>() / n : 0.0);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double ci95_halfwidth(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return 1.96 * std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

json to_json(const EvalReport& r) {
  json j{{"clean_accuracy", r.clean_accuracy},
         {"per_class_accuracy", r.per_class_accuracy},
         {"runs", r.runs},
         {"run_accuracies", r.run_accuracies}};
  if (r.shortcut_accuracy) j["shortcut_accuracy"] = *r.shortcut_accuracy;
  if (r.mean_attention) j["mean_attention"] = *r.mean_attention;
  if (r.ci95_halfwidth) j["ci95_halfwidth"] = *r.ci95_halfwidth;
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.per_class_accuracy = j.value("per_class_accuracy", std::vector<double>{});
  r.runs = j.value("runs", 1);
  r.run_accuracies = j.value("run_accuracies", std::vector<double>{});
  if (j.contains("shortcut_accuracy")) r.shortcut_accuracy = j.at("shortcut_accuracy").get<double>();
  if (j.contains("mean_attention")) r.mean_attention = j.at("mean_attention").get<double>();
  if (j.contains("ci95_halfwidth")) r.ci95_halfwidth = j.at("ci95_halfwidth").get<double>();
  return r;
}

const MatrixCell& EvalMatrix::cell(const std::string& train_set, bool lens) const {
  for (const auto& c : cells)
    if (c.train_set == train_set && c.lens == lens) return c;
  throw ContractError("no cell " + train_set + (lens ? "/lens" : "/baseline"));
}

std::string EvalMatrix::format_table() const {
  auto fmt = [](const EvalReport& r) {
    char buf[64];
    if (r.ci95_halfwidth)
      std::snprintf(buf, sizeof buf, "%5.1f +- %.1f", 100 * r.clean_accuracy, 100 * *r.ci95_halfwidth);
    else
      std::snprintf(buf, sizeof buf, "%5.1f", 100 * r.clean_accuracy);
    return std::string(buf);
  };
  std::ostringstream os;
  os << std::left << std::setw(12) << "train set" << std::setw(18) << "w/o lens"
     << "with lens\n";
  for (const char* set : {"clean", "shortcut"}) {
    os << std::setw(12) << set << std::setw(18) << fmt(cell(set, false).report)
       << fmt(cell(set, true).report) << "\n";
  }
  return os.str();
}

json to_json(const EvalMatrix& m) {
  json cells = json::array();
  for (const auto& c : m.cells)
    cells.push_back({{"train_set", c.train_set}, {"lens", c.lens}, {"report", to_json(c.report)}});
  return json{{"cells", cells}};
}

std::uint64_t run_seed(std::uint64_t seed, int run) {
  return derive_seed(derive_seed(seed, "run"), static_cast<std::uint64_t>(run));
}

EvalReport evaluate_cell(const TensorDataset& train_set, const TensorDataset& clean_test,
                         const TensorDataset& shortcut_test, const ExperimentConfig& config,
                         bool with_lens, int runs, const ProgressFn& progress) {
  if (runs < 1) throw ConfigError("runs", "must be >= 1");
  EvalReport r;
  r.runs = runs;
  std::vector<double> shortcut_acc, mass;
  std::vector<std::vector<double>> per_class;
  for (int i = 0; i < runs; ++i) {
    TrainConfig tc = config.train;
    tc.seed = run_seed(config.train.seed, i);
    TrainResult res = with_lens ? train(train_set, config.lens, config.classifier, tc)
                                : train_baseline(train_set, config.classifier, tc);
    r.run_accuracies.push_back(accuracy(res.classifier, clean_test));
    per_class.push_back(per_class_accuracy(res.classifier, clean_test));
    if (shortcut_test.size() > 0) shortcut_acc.push_back(accuracy(res.classifier, shortcut_test));
    if (with_lens) mass.push_back(*res.history.epochs.back().attention_mass);
    if (progress) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "run %d/%d clean accuracy %.4f", i + 1, runs,
                    r.run_accuracies.back());
      progress(buf);
    }
  }
  r.clean_accuracy = mean_of(r.run_accuracies);
  if (runs >= 2) r.ci95_halfwidth = ci95_halfwidth(r.run_accuracies);
  if (!shortcut_acc.empty()) r.shortcut_accuracy = mean_of(shortcut_acc);
  if (!mass.empty()) r.mean_attention = mean_of(mass);
  r.per_class_accuracy.assign(per_class.front().size(), 0.0);
  for (const auto& pc : per_class)
    for (size_t k = 0; k < pc.size(); ++k) r.per_class_accuracy[k] += pc[k] / runs;
  return r;
}

EvalMatrix eval_matrix(const ExperimentData& data, const ExperimentConfig& config, int runs,
                       const ProgressFn& progress) {
  if (runs < 1) throw ConfigError("runs", "must be >= 1");
  EvalMatrix m;
  for (const char* set : {"clean", "shortcut"}) {
    const TensorDataset& tr = std::string(set) == "clean" ? data.clean_train : data.shortcut_train;
    for (bool lens : {false, true}) {
      ProgressFn p;
      if (progress)
        p = [&](const std::string& msg) {
          progress(std::string(set) + (lens ? "/lens " : "/baseline ") + msg);
        };
      m.cells.push_back({set, lens, evaluate_cell(tr, data.clean_test, data.shortcut_test,
                                                  config, lens, runs, p)});
    }
  }
  return m;
}

std::vector<SweepRow> rho_sweep(const std::vector<double>& rhos, const TensorDataset& train_set,
                                const TensorDataset& clean_test, const ExperimentConfig& config,
                                int runs, const ProgressFn& progress) {
  for (double rho : rhos)
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  std::vector<SweepRow> rows;
  for (double rho : rhos) {
    ExperimentConfig c = config;
    c.lens.rho = rho;
    ProgressFn p;
    if (progress)
      p = [&](const std::string& msg) { progress("rho " + std::to_string(rho) + " " + msg); };
    EvalReport r = evaluate_cell(train_set, clean_test, TensorDataset{}, c, true, runs, p);
    rows.push_back({rho, r.clean_accuracy, r.ci95_halfwidth.value_or(0.0), r.run_accuracies});
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "rho,mean,error\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.rho, r.mean, r.error);
    out += buf;
  }
  return out;
}

std::vector<SweepRow> sweep_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<SweepRow> rows;
  if (!std::getline(is, line) || line.rfind("rho,mean,error", 0) != 0)
    throw ContractError("sweep csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    SweepRow r;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r.rho, &r.mean, &r.error) != 3)
      throw ContractError("sweep csv: bad row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

std::pair<int, int> CamHeatmap::argmax() const {
  auto it = std::max_element(data.begin(), data.end());
  int i = static_cast<int>(it - data.begin());
  return {i / width, i % width};
}

torch::Tensor gradcam_batch(Classifier& classifier, const torch::Tensor& images,
                            const std::vector<int>& targets) {
  const int64_t n = images.size(0);
  if (static_cast<int64_t>(targets.size()) != n)
    throw ContractError("gradcam: one target per image required");
  for (int t : targets)
    if (t < -1 || t >= classifier->config().num_classes)
      throw ConfigError("class", "target class " + std::to_string(t) + " out of range");
  classifier->eval();
  std::vector<torch::Tensor> maps;
  for (int64_t b = 0; b < n; b += 100) {
    torch::Tensor x = images.slice(0, b, b + 100);
    torch::Tensor feat = classifier->features(x);
    feat.retain_grad();
    torch::Tensor logits = classifier->head(feat);
    std::vector<int64_t> tg;
    auto pred = logits.argmax(1);
    for (int64_t i = 0; i < x.size(0); ++i) {
      int t = targets[b + i];
      tg.push_back(t < 0 ? pred[i].item<int64_t>() : t);
    }
    auto index = torch::tensor(tg, torch::kInt64).unsqueeze(1);
    logits.gather(1, index).sum().backward();
    torch::Tensor w = feat.grad().mean({2, 3}, true);
    torch::Tensor cam = torch::relu((w * feat).sum(1, true)).detach();
    cam = F::interpolate(cam, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{images.size(2), images.size(3)})
                                  .mode(torch::kBilinear)
                                  .align_corners(false))
              .squeeze(1);
    torch::Tensor peak = cam.flatten(1).amax(1).view({-1, 1, 1});
    maps.push_back(torch::where(peak > 0, cam / peak.clamp_min(1e-30), torch::zeros_like(cam)));
    classifier->zero_grad();
  }
  return torch::cat(maps);
}

CamHeatmap gradcam(Classifier& classifier, const torch::Tensor& image, int target_class) {
  if (target_class < 0 || target_class >= classifier->config().num_classes)
    throw ConfigError("class", "target class " + std::to_string(target_class) + " out of range");
  torch::Tensor x = image.dim() == 3 ? image.unsqueeze(0) : image;
  torch::Tensor cam = gradcam_batch(classifier, x, {target_class})[0].contiguous().to(torch::kFloat32);
  CamHeatmap h;
  h.height = cam.size(0);
  h.width = cam.size(1);
  h.data.assign(cam.data_ptr<float>(), cam.data_ptr<float>() + cam.numel());
  return h;
}

Image heatmap_image(const CamHeatmap& cam) {
  Image img(1, cam.height, cam.width);
  img.data = cam.data;
  return img;
}

Image visualize_lens(Lens& lens, const torch::Tensor& images) {
  torch::NoGradGuard guard;
  lens->eval();
  if (images.dim() != 4 || images.size(0) == 0)
    throw ContractError("visualize_lens: expected a nonempty (N, C, H, W) batch");
  LensOutput out = lens->forward(images);
  torch::Tensor diff = (images - out.image).abs();
  torch::Tensor peak = diff.flatten(1).amax(1).view({-1, 1, 1, 1});
  diff = torch::where(peak > 0, diff / peak.clamp_min(1e-30), torch::zeros_like(diff));
  const int64_t c = images.size(1);
  torch::Tensor att = out.attention.expand({-1, c, -1, -1});
  // (rows, N, C, H, W) -> (C, rows * H, N * W)
  torch::Tensor grid = torch::stack({images, out.image, diff, att});
  const int64_t n = images.size(0), h = images.size(2), w = images.size(3);
  grid = grid.permute({2, 0, 3, 1, 4}).reshape({c, 4 * h, n * w});
  return image_from_tensor(grid.clamp(0, 1));
}

torch::Tensor footprint_masks(const InjectionManifest& manifest, const std::vector<std::string>& ids) {
  const int h = manifest.height, w = manifest.width;
  torch::Tensor masks = torch::zeros({static_cast<int64_t>(ids.size()), h, w}, torch::kFloat32);
  auto acc = masks.accessor<float, 3>();
  for (size_t i = 0; i < ids.size(); ++i) {
    const InjectionRecord* rec = manifest.find(ids[i]);
    if (rec == nullptr) throw ContractError("manifest has no record for '" + ids[i] + "'");
    if (!rec->applied || !rec->placement) continue;
    auto fp = footprint(rec->label, manifest.spec, h, w, *rec->placement);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) acc[i][y][x] = fp[static_cast<size_t>(y) * w + x];
  }
  return masks;
}

double difference_mass_inside(const torch::Tensor& images, const torch::Tensor& lensed,
                              const torch::Tensor& masks) {
  torch::Tensor d = (images - lensed).abs().sum(1).to(torch::kFloat64);
  double total = d.sum().item<double>();
  if (total <= 0) return 0.0;
  return (d * masks.to(torch::kFloat64)).sum().item<double>() / total;
}

double argmax_inside_rate(const torch::Tensor& heatmaps, const torch::Tensor& masks) {
  const int64_t n = heatmaps.size(0);
  if (n == 0) return 0.0;
  auto idx = heatmaps.flatten(1).argmax(1, true);
  auto hit = masks.flatten(1).gather(1, idx);
  return hit.to(torch::kFloat64).mean().item<double>();
}

double mean_attention(Lens& lens, const torch::Tensor& images) {
  torch::NoGradGuard guard;
  lens->eval();
  double sum = 0;
  for (int64_t i = 0; i < images.size(0); i += kEvalBatch)
    sum += lens->attention()->forward(images.slice(0, i, i + kEvalBatch)).sum().item<double>();
  return sum / (images.size(0) * images.size(2) * images.size(3));
}

}  // namespace slens
