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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "slens/corpus.hpp"
#include "slens/evaluation.hpp"
#include "slens/shortcut.hpp"
#include "slens/training.hpp"

namespace slens {

// Settings used for the 10-class 32x32 desk corpus.
ExperimentConfig desk_experiment_config();

// Shortcut specs with the desk defaults (radius from the image size,
// apply probability 1).
ShortcutSpec color_dot_spec(int num_classes, std::uint64_t seed);
ShortcutSpec location_dot_spec(int num_classes, std::uint64_t seed);

struct TableRowSpec {
  std::string label;                  // e.g. "None", "Color Dot"
  std::optional<ShortcutSpec> spec;   // empty for the shortcut-free row
};

// A full table protocol: configs, repeat count, rows and data recipe.
struct TableProtocol {
  std::string name;
  ExperimentConfig config;
  int runs = 3;
  std::vector<TableRowSpec> rows;
  // Generated in memory when no dataset path is given; unset means a
  // dataset path is required.
  std::optional<DeskCorpusOptions> desk_corpus;
  TransformChain transforms;
  std::vector<std::string> classes;  // empty: all classes
};

std::vector<std::string> preset_names();
TableProtocol table_preset(const std::string& name);
nlohmann::json describe(const TableProtocol& p);

struct TableRow {
  std::string label;
  EvalReport without_lens;
  EvalReport with_lens;
};

struct TableReport {
  std::string preset;
  std::vector<TableRow> rows;

  std::string format() const;
  // The None row and the first shortcut row as the four matrix cells.
  EvalMatrix matrix() const;
};

nlohmann::json to_json(const TableReport& r);

// Perturbs the test set with a seed distinct from the training one.
LabeledDataset shortcut_test_set(const LabeledDataset& clean_test, const ShortcutSpec& spec);

TableReport reproduce_table(const TableProtocol& protocol, const LabeledDataset& train_set,
                            const LabeledDataset& test_set, const ProgressFn& progress = {});

}  // namespace slens
