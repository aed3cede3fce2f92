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

#include "slens/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"
#include "slens/rng.hpp"

namespace slens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GradientReversal : public torch::autograd::Function<GradientReversal> {
  static torch::Tensor forward(torch::autograd::AutogradContext*, const torch::Tensor& x) {
    return x.clone();
  }
  static torch::autograd::variable_list backward(torch::autograd::AutogradContext*,
                                                 torch::autograd::variable_list grads) {
    return {-grads[0]};
  }
};

}  // namespace

torch::Tensor gradient_reversal(const torch::Tensor& x) { return GradientReversal::apply(x); }

std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule lr_schedule_from_string(const std::string& name) {
  if (name == "constant") return LrSchedule::constant;
  if (name == "cosine") return LrSchedule::cosine;
  throw ConfigError("lr_schedule", "unknown schedule '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(classifier_lr > 0.0)) throw ConfigError("classifier_lr", "must be > 0");
  if (!(lens_lr > 0.0)) throw ConfigError("lens_lr", "must be > 0");
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(lambda_repr >= 0.0)) throw ConfigError("lambda_repr", "must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every", "must be >= 0");
  if (!(direct_weight >= 0.0)) throw ConfigError("direct_weight", "must be >= 0");
}

void ExperimentConfig::validate() const {
  lens.validate(classifier.input_channels);
  classifier.validate();
  train.validate();
  if (lens.lambda_repr != train.lambda_repr)
    throw ConfigError("lambda_repr", "lens and train values differ");
}

json to_json(const TrainConfig& c) {
  return json{{"classifier_lr", c.classifier_lr},
              {"lens_lr", c.lens_lr},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"dual_path", c.dual_path},
              {"lambda_repr", c.lambda_repr},
              {"checkpoint_every", c.checkpoint_every},
              {"direct_weight", c.direct_weight},
              {"lr_schedule", to_string(c.lr_schedule)},
              {"deterministic", c.deterministic}};
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.lens);
  j.update(to_json(c.classifier));
  j.update(to_json(c.train));
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  static const std::vector<std::string> lens_keys{"attention", "replacement", "rho"};
  static const std::vector<std::string> clf_keys{"architecture", "num_classes", "width",
                                                  "input_channels"};
  auto contains = [](const std::vector<std::string>& v, const std::string& k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  json lens_j = json::object(), clf_j = json::object();
  ExperimentConfig c;
  TrainConfig& t = c.train;
  for (const auto& [k, v] : j.items()) {
    if (contains(lens_keys, k)) {
      lens_j[k] = v;
    } else if (contains(clf_keys, k)) {
      clf_j[k] = v;
    } else {
      try {
        if (k == "lambda_repr") {
          t.lambda_repr = v.get<double>();
          lens_j[k] = v;
        } else if (k == "classifier_lr") t.classifier_lr = v.get<double>();
        else if (k == "lens_lr") t.lens_lr = v.get<double>();
        else if (k == "epochs") t.epochs = v.get<int>();
        else if (k == "batch_size") t.batch_size = v.get<int>();
        else if (k == "seed") t.seed = v.get<std::uint64_t>();
        else if (k == "dual_path") t.dual_path = v.get<bool>();
        else if (k == "checkpoint_every") t.checkpoint_every = v.get<int>();
        else if (k == "direct_weight") t.direct_weight = v.get<double>();
        else if (k == "lr_schedule") t.lr_schedule = lr_schedule_from_string(v.get<std::string>());
        else if (k == "deterministic") t.deterministic = v.get<bool>();
        else throw ConfigError(k, "unknown key");
      } catch (const json::exception&) {
        throw ConfigError(k, "wrong type");
      }
    }
  }
  c.lens = lens_config_from_json(lens_j);
  c.classifier = classifier_config_from_json(clf_j);
  if (c.classifier.input_channels != c.lens.replacement.output_channels &&
      !lens_j.contains("replacement"))
    c.lens.replacement.output_channels = c.classifier.input_channels;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string(), "cannot open config");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return experiment_config_from_json(j);
}

json to_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch}};
  if (r.ce_lensed) j["ce_lensed"] = *r.ce_lensed;
  if (r.ce_direct) j["ce_direct"] = *r.ce_direct;
  if (r.repr) j["repr"] = *r.repr;
  if (r.attention_mass) j["attention_mass"] = *r.attention_mass;
  j["train_accuracy"] = r.train_accuracy;
  j["classifier_lr"] = r.classifier_lr;
  j["lens_lr"] = r.lens_lr;
  j["seconds"] = r.seconds;
  return j;
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  auto opt = [&](const char* k, std::optional<double>& out) {
    if (j.contains(k)) out = j.at(k).get<double>();
  };
  opt("ce_lensed", r.ce_lensed);
  opt("ce_direct", r.ce_direct);
  opt("repr", r.repr);
  opt("attention_mass", r.attention_mass);
  r.train_accuracy = j.at("train_accuracy").get<double>();
  r.classifier_lr = j.value("classifier_lr", 0.0);
  r.lens_lr = j.value("lens_lr", 0.0);
  r.seconds = j.value("seconds", 0.0);
  return r;
}

std::string TrainHistory::to_ndjson() const {
  std::string out;
  for (const auto& r : epochs) out += to_json(r).dump() + "\n";
  return out;
}

TrainHistory TrainHistory::from_ndjson(const std::string& text) {
  TrainHistory h;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) h.epochs.push_back(epoch_record_from_json(json::parse(line)));
  return h;
}

void TrainHistory::write(const fs::path& path) const {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream os(tmp);
    os << to_ndjson();
    if (!os) throw IoError(tmp.string(), "write failed");
  });
}

TensorDataset to_tensors(const LabeledDataset& dataset) {
  TensorDataset t;
  t.num_classes = dataset.num_classes();
  if (dataset.items.empty()) return t;
  const Image& first = dataset.items.front().image;
  const int64_t n = static_cast<int64_t>(dataset.size());
  t.images = torch::empty({n, first.channels, first.height, first.width}, torch::kFloat32);
  t.labels = torch::empty({n}, torch::kInt64);
  float* dst = t.images.data_ptr<float>();
  auto* lab = t.labels.data_ptr<int64_t>();
  const size_t per = first.data.size();
  for (int64_t i = 0; i < n; ++i) {
    const auto& item = dataset.items[i];
    if (!item.image.same_shape(first))
      throw ContractError("to_tensors: image '" + item.id + "' has a different shape");
    std::copy(item.image.data.begin(), item.image.data.end(), dst + i * per);
    lab[i] = item.label;
    t.ids.push_back(item.id);
  }
  return t;
}

Image image_from_tensor(const torch::Tensor& chw) {
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (t.dim() != 3) throw ContractError("image_from_tensor: expected (C, H, W)");
  Image img(t.size(0), t.size(1), t.size(2));
  std::copy(t.data_ptr<float>(), t.data_ptr<float>() + t.numel(), img.data.begin());
  return img;
}

StepLosses forward_losses(const torch::Tensor& images, const torch::Tensor& labels, Lens* lens,
                          Classifier& classifier, double rho, const TrainConfig& config) {
  namespace F = torch::nn::functional;
  StepLosses s;
  if (lens == nullptr || lens->is_empty()) {
    s.logits = classifier->forward(images);
    s.ce_direct = F::cross_entropy(s.logits, labels);
    s.total = s.ce_direct;
    return s;
  }
  LensOutput out = (*lens)->forward(images);
  torch::Tensor lensed_logits = classifier->forward(gradient_reversal(out.image));
  s.ce_lensed = F::cross_entropy(lensed_logits, labels);
  s.repr = reproduction_loss(out.attention, rho);
  s.mass = attention_mass(out.attention).mean().detach();
  s.total = config.lambda_repr * s.repr + s.ce_lensed;
  if (config.dual_path) {
    s.logits = classifier->forward(images);
    s.ce_direct = F::cross_entropy(s.logits, labels);
    s.total = s.total + config.direct_weight * s.ce_direct;
  } else {
    s.logits = lensed_logits;
  }
  return s;
}

Optimizers make_optimizers(Lens* lens, Classifier& classifier, const TrainConfig& config) {
  Optimizers o;
  o.classifier = std::make_unique<torch::optim::Adam>(
      classifier->parameters(), torch::optim::AdamOptions(config.classifier_lr));
  if (lens != nullptr && !lens->is_empty())
    o.lens = std::make_unique<torch::optim::Adam>((*lens)->parameters(),
                                                  torch::optim::AdamOptions(config.lens_lr));
  return o;
}

namespace {

std::string describe(const StepLosses& s) {
  std::ostringstream os;
  auto put = [&](const char* name, const torch::Tensor& t) {
    if (t.defined()) os << " " << name << "=" << t.item<double>();
  };
  put("total", s.total);
  put("ce_lensed", s.ce_lensed);
  put("ce_direct", s.ce_direct);
  put("repr", s.repr);
  return os.str();
}

bool finite(const torch::Tensor& t) { return !t.defined() || std::isfinite(t.item<double>()); }

void set_lr(torch::optim::Adam* opt, double lr) {
  if (opt == nullptr) return;
  for (auto& group : opt->param_groups())
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

}  // namespace

StepLosses training_step(const torch::Tensor& images, const torch::Tensor& labels, Lens* lens,
                         Classifier& classifier, Optimizers& optimizers, double rho,
                         const TrainConfig& config, const StepOptions& options) {
  StepLosses s = forward_losses(images, labels, lens, classifier, rho, config);
  if (!finite(s.total) || !finite(s.ce_lensed) || !finite(s.ce_direct) || !finite(s.repr))
    throw TrainingError("non-finite loss at step " + std::to_string(options.step_index) + ":" +
                        describe(s));
  if (optimizers.lens) optimizers.lens->zero_grad();
  optimizers.classifier->zero_grad();
  s.total.backward();
  if (optimizers.lens && options.update_lens) optimizers.lens->step();
  if (options.update_classifier) optimizers.classifier->step();
  return s;
}

namespace {

void check_data(const TensorDataset& data, const ClassifierConfig& c) {
  if (data.size() == 0) throw ConfigError("data", "training set is empty");
  if (data.num_classes != c.num_classes)
    throw ConfigError("num_classes", "config has " + std::to_string(c.num_classes) +
                                         " classes, dataset has " +
                                         std::to_string(data.num_classes));
  if (data.images.size(1) != c.input_channels)
    throw ConfigError("input_channels", "config has " + std::to_string(c.input_channels) +
                                            ", images have " +
                                            std::to_string(data.images.size(1)));
}

void write_json(const fs::path& path, const json& j) {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream os(tmp);
    os << j.dump(2) << "\n";
    if (!os) throw IoError(tmp.string(), "write failed");
  });
}

TrainResult run(const TensorDataset& data, const LensConfig* lens_config,
                const ClassifierConfig& classifier_config, const TrainConfig& config,
                const TrainOptions& options) {
  config.validate();
  classifier_config.validate();
  check_data(data, classifier_config);
  if (lens_config) {
    lens_config->validate(classifier_config.input_channels);
    if (lens_config->lambda_repr != config.lambda_repr)
      throw ConfigError("lambda_repr", "lens and train values differ");
  }
  if (config.deterministic) torch::set_num_threads(1);

  torch::manual_seed(derive_seed(config.seed, "init"));
  TrainResult result;
  result.classifier = Classifier(classifier_config);
  if (lens_config) result.lens = Lens(*lens_config, classifier_config.input_channels);
  Lens* lens = lens_config ? &result.lens : nullptr;
  result.classifier->train();
  if (lens) (*lens)->train();
  Optimizers opt = make_optimizers(lens, result.classifier, config);
  const double rho = lens_config ? lens_config->rho : 0.0;

  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    ExperimentConfig exp;
    if (lens_config) exp.lens = *lens_config;
    exp.classifier = classifier_config;
    exp.train = config;
    json j = to_json(exp);
    j["baseline"] = lens_config == nullptr;
    write_json(options.out_dir / "config.json", j);
  }
  auto checkpoint = [&] {
    if (options.out_dir.empty()) return;
    save_classifier(result.classifier, options.out_dir / "classifier.pt");
    if (lens) save_lens(*lens, options.out_dir / "lens.pt");
    result.history.write(options.out_dir / "history.ndjson");
  };

  RngStream order(derive_seed(config.seed, "data_order"));
  const int64_t n = data.size();
  const int64_t bs = config.batch_size;
  const int64_t steps_per_epoch = (n + bs - 1) / bs;
  const int64_t total_steps = steps_per_epoch * config.epochs;
  std::vector<int64_t> perm(n);
  int64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    for (int64_t i = 0; i < n; ++i) perm[i] = i;
    for (int64_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[order.uniform_int(0, i)]);

    double ce_l = 0, ce_d = 0, repr = 0, mass = 0, correct = 0;
    double clr = config.classifier_lr, llr = config.lens_lr;
    for (int64_t b = 0; b < n; b += bs, ++step) {
      const int64_t m = std::min(bs, n - b);
      if (config.lr_schedule == LrSchedule::cosine) {
        double f = 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps));
        clr = config.classifier_lr * f;
        llr = config.lens_lr * f;
        set_lr(opt.classifier.get(), clr);
        set_lr(opt.lens.get(), llr);
      }
      auto idx = torch::from_blob(perm.data() + b, {m}, torch::kInt64);
      auto x = data.images.index_select(0, idx);
      auto y = data.labels.index_select(0, idx);
      StepOptions so;
      so.step_index = step;
      StepLosses s;
      try {
        s = training_step(x, y, lens, result.classifier, opt, rho, config, so);
      } catch (const TrainingError& e) {
        if (!options.out_dir.empty())
          write_json(options.out_dir / "diagnostic.json",
                     json{{"epoch", epoch}, {"step", step}, {"error", e.what()}});
        throw;
      }
      torch::NoGradGuard guard;
      if (s.ce_lensed.defined()) ce_l += s.ce_lensed.item<double>() * m;
      if (s.ce_direct.defined()) ce_d += s.ce_direct.item<double>() * m;
      if (s.repr.defined()) repr += s.repr.item<double>() * m;
      if (s.mass.defined()) mass += s.mass.item<double>() * m;
      correct += s.logits.argmax(1).eq(y).sum().item<double>();
    }
    EpochRecord r;
    r.epoch = epoch + 1;
    if (lens) {
      r.ce_lensed = ce_l / n;
      r.repr = repr / n;
      r.attention_mass = mass / n;
    }
    if (!lens || config.dual_path) r.ce_direct = ce_d / n;
    r.train_accuracy = correct / n;
    r.classifier_lr = clr;
    r.lens_lr = lens ? llr : 0.0;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(r);
    if (options.on_epoch) options.on_epoch(r);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) checkpoint();
  }
  checkpoint();
  result.classifier->eval();
  if (lens) (*lens)->eval();
  return result;
}

}  // namespace

TrainResult train(const TensorDataset& data, const LensConfig& lens_config,
                  const ClassifierConfig& classifier_config, const TrainConfig& config,
                  const TrainOptions& options) {
  return run(data, &lens_config, classifier_config, config, options);
}

TrainResult train_baseline(const TensorDataset& data, const ClassifierConfig& classifier_config,
                           const TrainConfig& config, const TrainOptions& options) {
  return run(data, nullptr, classifier_config, config, options);
}

}  // namespace slens
