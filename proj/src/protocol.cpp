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

#include "slens/protocol.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"
#include "slens/rng.hpp"

namespace slens {

using nlohmann::json;

ExperimentConfig desk_experiment_config() {
  ExperimentConfig c;
  c.classifier.architecture = Architecture::small_resnet;
  c.classifier.num_classes = 10;
  c.train.classifier_lr = 2e-3;
  c.train.lens_lr = 1e-3;
  c.train.epochs = 10;
  c.train.batch_size = 64;
  c.train.lr_schedule = LrSchedule::cosine;
  c.lens.rho = 0.025;
  c.lens.lambda_repr = c.train.lambda_repr = 15.0;
  return c;
}

ShortcutSpec color_dot_spec(int num_classes, std::uint64_t seed) {
  ShortcutSpec s;
  s.kind = ShortcutKind::color_dot;
  s.num_classes = num_classes;
  s.seed = seed;
  return s;
}

ShortcutSpec location_dot_spec(int num_classes, std::uint64_t seed) {
  ShortcutSpec s = color_dot_spec(num_classes, seed);
  s.kind = ShortcutKind::location_dot;
  return s;
}

std::vector<std::string> preset_names() {
  return {"desk-colordot", "desk-locdot", "paper-cifar", "paper-imagenet-logo",
          "paper-imagenet-watermark"};
}

TableProtocol table_preset(const std::string& name) {
  TableProtocol p;
  p.name = name;
  if (name == "desk-colordot" || name == "desk-locdot") {
    p.config = desk_experiment_config();
    p.runs = 3;
    p.desk_corpus = DeskCorpusOptions{};
    p.rows.push_back({"None", std::nullopt});
    if (name == "desk-colordot")
      p.rows.push_back({"Color Dot", color_dot_spec(10, 17)});
    else {
      // Larger disc so the footprint spans several GradCAM cells; the hinge
      // budget tracks its ~8% image share.
      ShortcutSpec s = location_dot_spec(10, 17);
      s.radius = 5;
      p.rows.push_back({"Location Dot", s});
      p.config.lens.rho = 0.08;
    }
    return p;
  }
  if (name == "paper-cifar") {
    p.config.classifier.architecture = Architecture::resnet18;
    p.config.classifier.num_classes = 10;
    p.config.train.classifier_lr = 1.5e-6;
    p.config.train.lens_lr = 1e-4;
    p.config.train.epochs = 30;
    p.config.train.lr_schedule = LrSchedule::constant;
    p.config.lens.rho = 0.025;
    p.config.lens.lambda_repr = p.config.train.lambda_repr = 15.0;
    p.config.lens.attention.base_channels = 8;
    p.config.lens.replacement.base_channels = 8;
    p.runs = 3;
    p.rows = {{"None", std::nullopt},
              {"Color Dot", color_dot_spec(10, 17)},
              {"Location Dot", location_dot_spec(10, 17)}};
    return p;
  }
  if (name == "paper-imagenet-logo" || name == "paper-imagenet-watermark") {
    const bool logo = name == "paper-imagenet-logo";
    p.config.classifier.architecture = Architecture::resnet18;
    p.config.classifier.num_classes = 2;
    p.config.classifier.input_channels = 1;
    p.config.lens.replacement.output_channels = 1;
    p.config.train.classifier_lr = 1.5e-6;
    p.config.train.lens_lr = 1e-4;
    p.config.train.epochs = 50;
    p.config.train.lr_schedule = LrSchedule::constant;
    p.config.lens.rho = logo ? 0.05 : 0.10;
    p.config.lens.lambda_repr = p.config.train.lambda_repr = 15.0;
    p.config.lens.attention.base_channels = 8;
    p.config.lens.replacement.base_channels = 8;
    p.runs = 3;
    p.transforms.grayscale = true;
    p.transforms.resize = std::make_pair(224, 224);
    ShortcutSpec s;
    s.kind = logo ? ShortcutKind::logo : ShortcutKind::watermark;
    s.num_classes = 2;
    s.seed = 17;
    if (!logo) {
      s.watermark.tile_width = 64;
      s.watermark.tile_height = 24;
      s.watermark.glyph_scale = 4;
    }
    p.rows = {{"None", std::nullopt}, {logo ? "Logo" : "Watermark", s}};
    return p;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("preset", "unknown preset '" + name + "' (known: " + known + ")");
}

json describe(const TableProtocol& p) {
  json rows = json::array();
  for (const auto& r : p.rows) {
    json row{{"label", r.label}};
    if (r.spec) row["spec"] = to_json(*r.spec);
    rows.push_back(row);
  }
  json j{{"preset", p.name},
         {"config", to_json(p.config)},
         {"runs", p.runs},
         {"rows", rows},
         {"transforms", p.transforms.describe()},
         {"generated_corpus", p.desk_corpus.has_value()}};
  if (!p.classes.empty()) j["classes"] = p.classes;
  return j;
}

std::string TableReport::format() const {
  auto cell = [](const EvalReport& r) {
    char buf[64];
    if (r.ci95_halfwidth)
      std::snprintf(buf, sizeof buf, "%.1f +- %.1f", 100 * r.clean_accuracy, 100 * *r.ci95_halfwidth);
    else
      std::snprintf(buf, sizeof buf, "%.1f", 100 * r.clean_accuracy);
    return std::string(buf);
  };
  std::ostringstream os;
  os << std::left << std::setw(16) << "Shortcut" << std::setw(16) << "W/o Lens" << "With Lens\n";
  for (const auto& r : rows)
    os << std::setw(16) << r.label << std::setw(16) << cell(r.without_lens) << cell(r.with_lens)
       << "\n";
  return os.str();
}

EvalMatrix TableReport::matrix() const {
  if (rows.size() < 2) throw ContractError("table has no shortcut row");
  EvalMatrix m;
  m.cells = {{"clean", false, rows[0].without_lens},
             {"clean", true, rows[0].with_lens},
             {"shortcut", false, rows[1].without_lens},
             {"shortcut", true, rows[1].with_lens}};
  return m;
}

json to_json(const TableReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"shortcut", row.label},
                    {"without_lens", to_json(row.without_lens)},
                    {"with_lens", to_json(row.with_lens)}});
  json j{{"preset", r.preset}, {"rows", rows}};
  if (r.rows.size() >= 2) j["cells"] = to_json(r.matrix())["cells"];
  return j;
}

LabeledDataset shortcut_test_set(const LabeledDataset& clean_test, const ShortcutSpec& spec) {
  ShortcutSpec s = spec;
  s.seed = derive_seed(spec.seed, "test");
  return build_shortcut_dataset(clean_test, s).dataset;
}

TableReport reproduce_table(const TableProtocol& protocol, const LabeledDataset& train_set,
                            const LabeledDataset& test_set, const ProgressFn& progress) {
  protocol.config.validate();
  TableReport report;
  report.preset = protocol.name;
  TensorDataset clean_test = to_tensors(test_set);
  for (const auto& row : protocol.rows) {
    TensorDataset tr, sc_test;
    if (row.spec) {
      tr = to_tensors(build_shortcut_dataset(train_set, *row.spec).dataset);
      sc_test = to_tensors(shortcut_test_set(test_set, *row.spec));
    } else {
      tr = to_tensors(train_set);
    }
    TableRow out;
    out.label = row.label;
    for (bool lens : {false, true}) {
      ProgressFn p;
      if (progress)
        p = [&](const std::string& m) {
          progress(row.label + (lens ? " / with lens: " : " / w/o lens: ") + m);
        };
      EvalReport r = evaluate_cell(tr, clean_test, sc_test, protocol.config, lens,
                                   protocol.runs, p);
      (lens ? out.with_lens : out.without_lens) = r;
    }
    report.rows.push_back(out);
  }
  return report;
}

}  // namespace slens
