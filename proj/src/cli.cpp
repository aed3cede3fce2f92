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

#include "slens/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "slens/corpus.hpp"
#include "slens/errors.hpp"
#include "slens/evaluation.hpp"
#include "slens/png_io.hpp"
#include "slens/protocol.hpp"
#include "slens/training.hpp"

#ifndef SLENS_VERSION
#define SLENS_VERSION "0.0.0"
#endif

namespace slens {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version_string() { return SLENS_VERSION; }

json to_json(const RunRecord& r) {
  return json{{"command", r.command},         {"argv", r.argv},
              {"config", r.config},           {"seed", r.seed},
              {"version", r.version},         {"corpus_checksum", r.corpus_checksum},
              {"started_at", r.started_at},   {"wall_seconds", r.wall_seconds},
              {"outputs", r.outputs},         {"results", r.results},
              {"status", r.status}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.command = j.at("command").get<std::string>();
  r.argv = j.at("argv").get<std::vector<std::string>>();
  r.config = j.at("config");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.version = j.at("version").get<std::string>();
  r.corpus_checksum = j.at("corpus_checksum").get<std::string>();
  r.started_at = j.at("started_at").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.outputs = j.at("outputs").get<std::vector<std::string>>();
  r.results = j.value("results", json::object());
  r.status = j.at("status").get<std::string>();
  return r;
}

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream os(tmp, std::ios::binary);
    os << text;
    if (!os) throw IoError(tmp.string(), "write failed");
  });
}

}  // namespace

RunDirectory::RunDirectory(fs::path dir, std::string command, std::vector<std::string> argv)
    : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError(dir_.string(), "cannot create run directory: " + ec.message());
  lock_ = dir_ / ".slens.lock";
  int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    lock_.clear();
    throw IoError(dir_.string(), "run directory is locked by another process");
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  if (fs::exists(dir_ / "run.json")) {
    fs::remove(lock_, ec);
    lock_.clear();
    throw IoError((dir_ / "run.json").string(), "run directory already holds a run record");
  }
  record_.command = std::move(command);
  record_.argv = std::move(argv);
  record_.version = version_string();
  record_.started_at = utc_now();
  t0_ = now_seconds();
}

RunDirectory::~RunDirectory() {
  try {
    if (!finished_ && !lock_.empty()) finish("failed");
  } catch (...) {
  }
  std::error_code ec;
  if (!lock_.empty()) fs::remove(lock_, ec);
}

fs::path RunDirectory::artifact(const std::string& name) {
  fs::path p = dir_ / name;
  add_output(p);
  return p;
}

void RunDirectory::add_output(const fs::path& p) {
  const std::string s = p.string();
  if (std::find(record_.outputs.begin(), record_.outputs.end(), s) == record_.outputs.end())
    record_.outputs.push_back(s);
}

void RunDirectory::finish(const std::string& status) {
  record_.status = status;
  record_.wall_seconds = now_seconds() - t0_;
  add_output(dir_ / "run.json");
  write_text(dir_ / "run.json", to_json(record_).dump(2) + "\n");
  finished_ = true;
}

namespace {

struct DataOptions {
  std::string data;
  bool grayscale = false;
  std::string classes;
  std::string resize;
  int per_class = 0;
  std::uint64_t subset_seed = 0;
  bool desk = false;
};

void add_data_options(CLI::App* app, DataOptions& o, bool allow_desk) {
  app->add_option("--data", o.data,
                  std::string("dataset root (image folders or the binary 10-class archive); "
                              "defaults to $") + kDataRootEnv);
  app->add_flag("--grayscale", o.grayscale, "convert images to one luma channel");
  app->add_option("--classes", o.classes, "comma-separated class names to keep");
  app->add_option("--resize", o.resize, "HxW bilinear resize");
  app->add_option("--per-class", o.per_class, "class-balanced subset size per class");
  app->add_option("--subset-seed", o.subset_seed, "seed of the subset draw");
  if (allow_desk)
    app->add_flag("--desk", o.desk, "generate the procedural desk corpus in memory");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

fs::path resolve_data(const std::string& data) {
  const char* root = std::getenv(kDataRootEnv);
  if (data.empty()) {
    if (root == nullptr || *root == 0)
      throw ConfigError("data", std::string("no --data given and $") + kDataRootEnv + " is unset");
    return fs::path(root);
  }
  fs::path p(data);
  if (p.is_relative() && !fs::exists(p) && root != nullptr && *root != 0) return fs::path(root) / p;
  return p;
}

TransformChain transforms_of(const DataOptions& o) {
  TransformChain t;
  t.grayscale = o.grayscale;
  if (!o.resize.empty()) {
    int h = 0, w = 0;
    char x = 0;
    std::istringstream is(o.resize);
    if (!(is >> h >> x >> w) || (x != 'x' && x != 'X') || h < 1 || w < 1)
      throw ConfigError("resize", "expected HxW, got '" + o.resize + "'");
    t.resize = std::make_pair(h, w);
  }
  return t;
}

struct LoadedSplit {
  LabeledDataset data;
  std::string checksum;
  std::optional<DatasetHandle> handle;
};

LoadedSplit load_split(const DataOptions& o, Split split) {
  LoadedSplit out;
  if (o.desk && o.data.empty()) {
    out.data = generate_desk_split(DeskCorpusOptions{}, split);
    out.checksum = "desk:seed=1";
    return out;
  }
  DatasetHandle h = load_dataset(resolve_data(o.data), split, transforms_of(o));
  if (!o.classes.empty()) h = select_classes(h, split_list(o.classes));
  if (o.per_class > 0) h = subset(h, o.per_class, o.subset_seed);
  out.checksum = corpus_checksum(h);
  out.data = load_images(h);
  out.handle = h;
  return out;
}

json read_json_file(const fs::path& p, const std::string& field) {
  std::ifstream is(p);
  if (!is) throw IoError(p.string(), "cannot open");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(field, p.string() + " is not valid JSON: " + e.what());
  }
}

// Shortcut from --spec FILE or --shortcut KIND; empty when neither is set.
std::optional<ShortcutSpec> shortcut_of(const std::string& spec_file, const std::string& kind,
                                        int num_classes, std::optional<std::uint64_t> seed) {
  std::optional<ShortcutSpec> s;
  if (!spec_file.empty()) {
    try {
      s = shortcut_spec_from_json(read_json_file(spec_file, "spec"));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidSpecError(spec_file + ": " + e.what());
    }
  } else if (!kind.empty() && kind != "none") {
    s = ShortcutSpec{};
    s->kind = shortcut_kind_from_string(kind);
    s->num_classes = num_classes;
    s->seed = 17;
  }
  if (s && seed) s->seed = *seed;
  return s;
}

struct LoadedConfig {
  ExperimentConfig config;
  json raw = json::object();
};

LoadedConfig config_of(const std::string& file) {
  if (file.empty()) return {desk_experiment_config(), json::object()};
  json raw = read_json_file(file, "config");
  return {experiment_config_from_json(raw), raw};
}

// Class and channel counts follow the data unless the config file pins them.
void fit_config_to_data(LoadedConfig& lc, const LabeledDataset& d) {
  if (d.items.empty()) throw ConfigError("data", "dataset is empty");
  ExperimentConfig& c = lc.config;
  const int channels = d.items.front().image.channels;
  if (!lc.raw.contains("num_classes")) c.classifier.num_classes = d.num_classes();
  if (!lc.raw.contains("input_channels")) {
    c.classifier.input_channels = channels;
    if (!lc.raw.contains("replacement")) c.lens.replacement.output_channels = channels;
  }
  c.validate();
}

std::vector<std::string> argv_vector(int argc, const char* const* argv) {
  return std::vector<std::string>(argv, argv + argc);
}

LabeledDataset load_png_list(const fs::path& dir, int limit, int channels) {
  if (!fs::exists(dir)) throw IoError(dir.string(), "no such directory");
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) {
    files.push_back(dir);
  } else {
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(dir.string(), "no PNG images found");
  if (limit > 0 && static_cast<int>(files.size()) > limit) files.resize(limit);
  LabeledDataset d;
  d.class_names = {"image"};
  for (const auto& f : files) {
    Image img = read_png(f);
    if (channels == 1 && img.channels != 1) img = to_grayscale(img);
    d.items.push_back({f.filename().string(), 0, std::move(img)});
  }
  return d;
}

// ---- subcommands ---------------------------------------------------------

struct Common {
  std::vector<std::string> argv;
  std::ostream* out;
  std::ostream* err;
};

int cmd_make_corpus(const Common& c, const std::string& out_dir, const DeskCorpusOptions& o) {
  RunDirectory run(out_dir, "make-corpus", c.argv);
  generate_desk_corpus(out_dir, o);
  run.record().seed = o.seed;
  run.record().config = {{"classes", o.classes}, {"train_per_class", o.train_per_class},
                         {"test_per_class", o.test_per_class}, {"size", o.size},
                         {"noise", o.noise}, {"clutter", o.clutter}, {"seed", o.seed}};
  for (Split s : {Split::train, Split::test}) {
    DatasetHandle h = load_dataset(out_dir, s);
    run.record().corpus_checksum += (run.record().corpus_checksum.empty() ? "" : " ") +
                                    to_string(s) + "=" + corpus_checksum(h);
    run.add_output(fs::path(out_dir) / to_string(s));
  }
  run.finish();
  *c.out << "wrote desk corpus to " << out_dir << "\n";
  return 0;
}

int cmd_inject(const Common& c, const DataOptions& d, const std::string& out_dir,
               const std::string& spec_file, const std::string& kind,
               std::optional<std::uint64_t> seed, const std::string& splits) {
  std::vector<Split> wanted;
  for (const auto& s : split_list(splits)) wanted.push_back(split_from_string(s));
  if (wanted.empty()) throw ConfigError("split", "no split selected");

  LabeledDataset all;
  std::string checksum;
  std::vector<std::pair<Split, LabeledDataset>> parts;
  for (Split s : wanted) {
    LoadedSplit l = load_split(d, s);
    checksum += (checksum.empty() ? "" : " ") + to_string(s) + "=" + l.checksum;
    if (all.class_names.empty()) all.class_names = l.data.class_names;
    if (l.data.class_names != all.class_names)
      throw ConfigError("data", "class set differs between splits");
    for (auto& item : l.data.items) {
      item.id = to_string(s) + "/" + item.id;
      all.items.push_back(std::move(item));
    }
    parts.push_back({s, LabeledDataset{l.data.class_names, {}}});
  }
  auto spec = shortcut_of(spec_file, kind.empty() ? "color_dot" : kind, all.num_classes(), seed);
  if (!spec) throw ConfigError("spec", "inject needs --spec or a --shortcut kind");

  RunDirectory run(out_dir, "inject", c.argv);
  ShortcutDataset sd = build_shortcut_dataset(all, *spec);
  for (auto& item : sd.dataset.items) {
    const auto slash = item.id.find('/');
    Split s = split_from_string(item.id.substr(0, slash));
    for (auto& [ps, pd] : parts)
      if (ps == s) pd.items.push_back({item.id.substr(slash + 1), item.label, item.image});
  }
  for (auto& [s, pd] : parts) {
    write_image_folder(pd, out_dir, s);
    run.add_output(fs::path(out_dir) / to_string(s));
  }
  write_text(run.artifact("manifest.json"), to_json(sd.manifest).dump(1) + "\n");
  run.record().config = to_json(sd.manifest.spec);
  run.record().seed = sd.manifest.spec.seed;
  run.record().corpus_checksum = checksum;
  size_t applied = 0;
  for (const auto& r : sd.manifest.records) applied += r.applied;
  run.record().results = {{"images", sd.manifest.records.size()}, {"applied", applied}};
  run.finish();
  *c.out << "injected " << to_string(spec->kind) << " into " << applied << " of "
         << sd.manifest.records.size() << " images\n";
  return 0;
}

int cmd_train(const Common& c, const DataOptions& d, const std::string& config_file,
              const std::string& out_dir, bool baseline, bool deterministic,
              const std::string& spec_file, const std::string& kind,
              std::optional<std::uint64_t> seed) {
  LoadedConfig lc = config_of(config_file);
  LoadedSplit train_split = load_split(d, Split::train);
  fit_config_to_data(lc, train_split.data);
  ExperimentConfig cfg = lc.config;
  if (deterministic) cfg.train.deterministic = true;
  if (seed) cfg.train.seed = *seed;
  LabeledDataset train_set = train_split.data;
  auto spec = shortcut_of(spec_file, kind, train_set.num_classes(), std::nullopt);
  if (spec) train_set = build_shortcut_dataset(train_set, *spec).dataset;

  RunDirectory run(out_dir, baseline ? "train --baseline" : "train", c.argv);
  run.record().config = to_json(cfg);
  run.record().config["baseline"] = baseline;
  if (spec) run.record().config["shortcut"] = to_json(*spec);
  run.record().seed = cfg.train.seed;
  run.record().corpus_checksum = train_split.checksum;

  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.on_epoch = [&](const EpochRecord& r) { *c.out << to_json(r).dump() << std::endl; };
  TensorDataset data = to_tensors(train_set);
  TrainResult res = baseline ? train_baseline(data, cfg.classifier, cfg.train, opts)
                             : train(data, cfg.lens, cfg.classifier, cfg.train, opts);
  for (const char* f : {"config.json", "classifier.pt", "classifier.pt.json", "history.ndjson"})
    run.add_output(fs::path(out_dir) / f);
  if (!baseline) {
    run.add_output(fs::path(out_dir) / "lens.pt");
    run.add_output(fs::path(out_dir) / "lens.pt.json");
  }
  const EpochRecord& last = res.history.epochs.back();
  run.record().results = to_json(last);
  try {
    LoadedSplit test = load_split(d, Split::test);
    double acc = accuracy(res.classifier, to_tensors(test.data));
    run.record().results["clean_test_accuracy"] = acc;
    *c.out << "clean test accuracy " << acc << "\n";
  } catch (const IoError&) {
    // no test split next to the training data
  }
  run.finish();
  return 0;
}

fs::path classifier_path(const fs::path& p) {
  return fs::is_directory(p) ? p / "classifier.pt" : p;
}

int cmd_evaluate(const Common& c, const DataOptions& d, const std::string& checkpoint,
                 const std::string& out_file, const std::string& split,
                 const std::string& spec_file, const std::string& kind) {
  fs::path ck = classifier_path(checkpoint);
  Classifier clf = load_classifier(ck);
  LoadedSplit test = load_split(d, split_from_string(split));
  TensorDataset clean = to_tensors(test.data);

  fs::path out(out_file);
  RunDirectory run(out.has_parent_path() ? out.parent_path() : fs::path("."), "evaluate", c.argv);
  EvalReport r;
  r.clean_accuracy = accuracy(clf, clean);
  r.per_class_accuracy = per_class_accuracy(clf, clean);
  auto spec = shortcut_of(spec_file, kind, test.data.num_classes(), std::nullopt);
  if (spec) r.shortcut_accuracy = accuracy(clf, to_tensors(shortcut_test_set(test.data, *spec)));
  fs::path lens_file = ck.parent_path() / "lens.pt";
  if (fs::exists(lens_file)) {
    Lens lens = load_lens(lens_file);
    r.mean_attention = mean_attention(lens, clean.images);
  }
  write_text(out, to_json(r).dump(2) + "\n");
  run.add_output(out);
  run.record().config = {{"checkpoint", ck.string()}, {"split", split}};
  run.record().corpus_checksum = test.checksum;
  run.record().results = to_json(r);
  run.finish();
  *c.out << to_json(r).dump(2) << "\n";
  return 0;
}

int cmd_sweep(const Common& c, const DataOptions& d, const std::string& config_file,
              const std::string& rhos_text, int runs, const std::string& out_file,
              const std::string& spec_file, const std::string& kind, bool deterministic) {
  std::vector<double> rhos;
  for (const auto& s : split_list(rhos_text)) {
    try {
      size_t used = 0;
      rhos.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("rhos", "not a number: '" + s + "'");
    }
  }
  if (rhos.empty()) throw ConfigError("rhos", "no values given");
  for (double r : rhos)
    if (!(r >= 0 && r <= 1)) throw ConfigError("rho", "must lie in [0, 1]");
  if (runs < 1) throw ConfigError("runs", "must be >= 1");
  LoadedConfig lc = config_of(config_file);
  LoadedSplit tr = load_split(d, Split::train);
  LoadedSplit te = load_split(d, Split::test);
  fit_config_to_data(lc, tr.data);
  ExperimentConfig cfg = lc.config;
  if (deterministic) cfg.train.deterministic = true;
  LabeledDataset train_set = tr.data;
  auto spec = shortcut_of(spec_file, kind, train_set.num_classes(), std::nullopt);
  if (spec) train_set = build_shortcut_dataset(train_set, *spec).dataset;

  fs::path out(out_file);
  RunDirectory run(out.has_parent_path() ? out.parent_path() : fs::path("."), "sweep-rho", c.argv);
  run.record().config = to_json(cfg);
  run.record().config["rhos"] = rhos;
  run.record().config["runs"] = runs;
  if (spec) run.record().config["shortcut"] = to_json(*spec);
  run.record().seed = cfg.train.seed;
  run.record().corpus_checksum = tr.checksum;
  auto rows = rho_sweep(rhos, to_tensors(train_set), to_tensors(te.data), cfg, runs,
                        [&](const std::string& m) { *c.out << m << std::endl; });
  write_text(out, sweep_to_csv(rows));
  run.add_output(out);
  json res = json::array();
  for (const auto& r : rows) res.push_back({{"rho", r.rho}, {"mean", r.mean}, {"error", r.error}});
  run.record().results = {{"rows", res}};
  run.finish();
  *c.out << sweep_to_csv(rows);
  return 0;
}

int cmd_visualize(const Common& c, const std::string& checkpoint, const std::string& images,
                  const std::string& out_file, int limit) {
  fs::path ck = fs::is_directory(checkpoint) ? fs::path(checkpoint) / "lens.pt" : fs::path(checkpoint);
  Lens lens = load_lens(ck);
  LabeledDataset d = load_png_list(images, limit, lens->image_channels());
  fs::path out(out_file);
  RunDirectory run(out.has_parent_path() ? out.parent_path() : fs::path("."), "visualize", c.argv);
  Image grid = visualize_lens(lens, to_tensors(d).images);
  write_png(out, grid);
  run.add_output(out);
  run.record().config = {{"checkpoint", ck.string()}, {"images", images}, {"count", d.size()}};
  run.finish();
  *c.out << "wrote " << out.string() << " (" << d.size() << " columns)\n";
  return 0;
}

int cmd_gradcam(const Common& c, const std::string& checkpoint, const std::string& image,
                int cls, const std::string& out_file) {
  Classifier clf = load_classifier(classifier_path(checkpoint));
  Image img = read_png(image);
  if (clf->config().input_channels == 1 && img.channels != 1) img = to_grayscale(img);
  LabeledDataset d{{"image"}, {{"image", 0, img}}};
  CamHeatmap cam = gradcam(clf, to_tensors(d).images[0], cls);
  fs::path out(out_file);
  RunDirectory run(out.has_parent_path() ? out.parent_path() : fs::path("."), "gradcam", c.argv);
  write_png(out, heatmap_image(cam));
  run.add_output(out);
  auto [y, x] = cam.argmax();
  run.record().config = {{"checkpoint", checkpoint}, {"image", image}, {"class", cls}};
  run.record().results = {{"argmax_x", x}, {"argmax_y", y}};
  run.finish();
  *c.out << "peak at x=" << x << " y=" << y << "\n";
  return 0;
}

int cmd_reproduce(const Common& c, const DataOptions& d, const std::string& preset,
                  const std::string& out_dir, int runs, int epochs, bool dry_run) {
  TableProtocol p = table_preset(preset);
  if (runs > 0) p.runs = runs;
  if (epochs > 0) p.config.train.epochs = epochs;
  if (d.grayscale) p.transforms.grayscale = true;
  if (dry_run) {
    *c.out << describe(p).dump(2) << "\n";
    return 0;
  }
  LabeledDataset train_set, test_set;
  std::string checksum;
  if (d.data.empty() && std::getenv(kDataRootEnv) == nullptr && p.desk_corpus) {
    train_set = generate_desk_split(*p.desk_corpus, Split::train);
    test_set = generate_desk_split(*p.desk_corpus, Split::test);
    checksum = "desk:seed=" + std::to_string(p.desk_corpus->seed);
  } else {
    DataOptions o = d;
    if (p.transforms.grayscale) o.grayscale = true;
    if (p.transforms.resize && o.resize.empty())
      o.resize = std::to_string(p.transforms.resize->first) + "x" +
                 std::to_string(p.transforms.resize->second);
    LoadedSplit tr = load_split(o, Split::train);
    LoadedSplit te = load_split(o, Split::test);
    train_set = std::move(tr.data);
    test_set = std::move(te.data);
    checksum = tr.checksum;
  }
  if (train_set.num_classes() != p.config.classifier.num_classes)
    throw ConfigError("num_classes", "preset expects " +
                                         std::to_string(p.config.classifier.num_classes) +
                                         " classes, data has " +
                                         std::to_string(train_set.num_classes()));
  RunDirectory run(out_dir, "reproduce-table", c.argv);
  run.record().config = describe(p);
  run.record().seed = p.config.train.seed;
  run.record().corpus_checksum = checksum;
  TableReport report = reproduce_table(p, train_set, test_set,
                                       [&](const std::string& m) { *c.out << m << std::endl; });
  write_text(run.artifact("report.json"), to_json(report).dump(2) + "\n");
  write_text(run.artifact("table.txt"), report.format());
  run.record().results = to_json(report);
  run.finish();
  *c.out << report.format();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic shortcut injection and adversarial lens training", "slens"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1, 1);
  Common common{argv_vector(argc, argv), &out, &err};

  // make-corpus
  auto* mk = app.add_subcommand("make-corpus", "write the procedural desk corpus as image folders");
  std::string mk_out;
  DeskCorpusOptions mk_opts;
  mk->add_option("--out", mk_out, "output directory")->required();
  mk->add_option("--train-per-class", mk_opts.train_per_class);
  mk->add_option("--test-per-class", mk_opts.test_per_class);
  mk->add_option("--size", mk_opts.size, "image side in pixels");
  mk->add_option("--noise", mk_opts.noise);
  mk->add_option("--clutter", mk_opts.clutter);
  mk->add_option("--seed", mk_opts.seed);

  // inject
  auto* inj = app.add_subcommand("inject", "inject a synthetic shortcut into a dataset");
  DataOptions inj_data;
  std::string inj_out, inj_spec, inj_kind, inj_splits = "train,test";
  std::optional<std::uint64_t> inj_seed;
  add_data_options(inj, inj_data, true);
  inj->add_option("--out", inj_out, "output directory")->required();
  inj->add_option("--spec", inj_spec, "shortcut spec JSON");
  inj->add_option("--shortcut", inj_kind, "shortcut kind when no spec file is given");
  inj->add_option("--seed", inj_seed, "overrides the spec seed");
  inj->add_option("--split", inj_splits, "comma-separated splits to process");

  // train
  auto* tr = app.add_subcommand("train", "train a classifier with or without the lens");
  DataOptions tr_data;
  std::string tr_config, tr_out, tr_spec, tr_kind;
  bool tr_baseline = false, tr_det = false;
  std::optional<std::uint64_t> tr_seed;
  add_data_options(tr, tr_data, true);
  tr->add_option("--config", tr_config, "experiment config JSON");
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_flag("--baseline", tr_baseline, "classifier only, no lens");
  tr->add_flag("--deterministic", tr_det, "single-threaded, bit-reproducible");
  tr->add_option("--spec", tr_spec, "shortcut spec applied to the training split in memory");
  tr->add_option("--shortcut", tr_kind, "shortcut kind applied in memory");
  tr->add_option("--seed", tr_seed, "overrides the config seed");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "clean-data accuracy of a checkpoint");
  DataOptions ev_data;
  std::string ev_ck, ev_out, ev_split = "test", ev_spec, ev_kind;
  add_data_options(ev, ev_data, true);
  ev->add_option("--checkpoint", ev_ck, "classifier.pt or a run directory")->required();
  ev->add_option("--out", ev_out, "report JSON")->required();
  ev->add_option("--split", ev_split);
  ev->add_option("--spec", ev_spec, "also report accuracy on shortcut-perturbed data");
  ev->add_option("--shortcut", ev_kind);

  // sweep-rho
  auto* sw = app.add_subcommand("sweep-rho", "clean accuracy over hinge budgets");
  DataOptions sw_data;
  std::string sw_rhos = "0.005,0.025,0.05,0.1,0.25,0.5", sw_out, sw_config, sw_spec, sw_kind;
  int sw_runs = 3;
  bool sw_det = false;
  add_data_options(sw, sw_data, true);
  sw->add_option("--rhos", sw_rhos, "comma-separated budgets");
  sw->add_option("--runs", sw_runs, "runs per budget");
  sw->add_option("--out", sw_out, "CSV output")->required();
  sw->add_option("--config", sw_config);
  sw->add_option("--spec", sw_spec);
  sw->add_option("--shortcut", sw_kind);
  sw->add_flag("--deterministic", sw_det);

  // visualize
  auto* vi = app.add_subcommand("visualize", "input / lens output / difference / mask grid");
  std::string vi_ck, vi_images, vi_out;
  int vi_limit = 8;
  vi->add_option("--checkpoint", vi_ck, "lens.pt or a run directory")->required();
  vi->add_option("--images", vi_images, "directory of PNG images")->required();
  vi->add_option("--out", vi_out, "PNG output")->required();
  vi->add_option("--limit", vi_limit, "maximum number of columns");

  // gradcam
  auto* gc = app.add_subcommand("gradcam", "class activation map of one image");
  std::string gc_ck, gc_image, gc_out;
  int gc_class = 0;
  gc->add_option("--checkpoint", gc_ck, "classifier.pt or a run directory")->required();
  gc->add_option("--image", gc_image, "PNG input")->required();
  gc->add_option("--class", gc_class, "target class index")->required();
  gc->add_option("--out", gc_out, "PNG output")->required();

  // reproduce-table
  auto* rt = app.add_subcommand("reproduce-table", "with/without lens accuracy table");
  DataOptions rt_data;
  std::string rt_preset = "desk-colordot", rt_out;
  int rt_runs = 0, rt_epochs = 0;
  bool rt_dry = false;
  add_data_options(rt, rt_data, false);
  rt->add_option("--preset", rt_preset, "one of desk-colordot, desk-locdot, paper-cifar, "
                                        "paper-imagenet-logo, paper-imagenet-watermark");
  rt->add_option("--out", rt_out, "run directory");
  rt->add_option("--runs", rt_runs, "override the preset's repeat count");
  rt->add_option("--epochs", rt_epochs, "override the preset's epoch count");
  rt->add_flag("--dry-run", rt_dry, "print the protocol and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  try {
    if (*mk) return cmd_make_corpus(common, mk_out, mk_opts);
    if (*inj) return cmd_inject(common, inj_data, inj_out, inj_spec, inj_kind, inj_seed, inj_splits);
    if (*tr)
      return cmd_train(common, tr_data, tr_config, tr_out, tr_baseline, tr_det, tr_spec, tr_kind,
                       tr_seed);
    if (*ev) return cmd_evaluate(common, ev_data, ev_ck, ev_out, ev_split, ev_spec, ev_kind);
    if (*sw)
      return cmd_sweep(common, sw_data, sw_config, sw_rhos, sw_runs, sw_out, sw_spec, sw_kind,
                       sw_det);
    if (*vi) return cmd_visualize(common, vi_ck, vi_images, vi_out, vi_limit);
    if (*gc) return cmd_gradcam(common, gc_ck, gc_image, gc_class, gc_out);
    if (*rt) {
      if (rt_out.empty() && !rt_dry) throw ConfigError("out", "--out is required");
      return cmd_reproduce(common, rt_data, rt_preset, rt_out, rt_runs, rt_epochs, rt_dry);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const c10::Error& e) {
    err << "error: " << e.what_without_backtrace() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace slens
