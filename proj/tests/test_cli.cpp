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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest_torch.hpp"
#include "slens/cli.hpp"
#include "slens/errors.hpp"
#include "test_util.hpp"

using namespace slens;
using slens::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "slens");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST_CASE("help exits zero with usage") {
  Result r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Usage") != std::string::npos);
  CHECK(r.out.find("reproduce-table") != std::string::npos);
  CHECK(cli({"train", "--help"}).code == 0);
}

TEST_CASE("unknown subcommand prints usage and exits one") {
  Result r = cli({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"train", "--no-such-flag"}).code == 1);
}

TEST_CASE("invalid rho is a validation error naming the field") {
  TempDir tmp;
  write_file(tmp.path() / "bad.json", R"({"rho": 1.5})");
  Result r = cli({"train", "--desk", "--config", (tmp.path() / "bad.json").string(), "--out",
                  (tmp.path() / "run").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("rho") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path() / "run" / "run.json"));

  r = cli({"sweep-rho", "--desk", "--rhos", "0.1,1.5", "--out", (tmp.path() / "s.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("rho") != std::string::npos);
}

TEST_CASE("missing data root is a validation error") {
  TempDir tmp;
  const char* saved = std::getenv(kDataRootEnv);
  std::string keep = saved ? saved : "";
  unsetenv(kDataRootEnv);
  Result r = cli({"train", "--out", (tmp.path() / "run").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("data") != std::string::npos);
  if (saved) setenv(kDataRootEnv, keep.c_str(), 1);
}

TEST_CASE("data root falls back to the environment") {
  TempDir tmp;
  REQUIRE(cli({"make-corpus", "--out", (tmp.path() / "corp").string(), "--train-per-class", "2",
               "--test-per-class", "1"})
              .code == 0);
  setenv(kDataRootEnv, (tmp.path() / "corp").string().c_str(), 1);
  Result r = cli({"inject", "--shortcut", "color_dot", "--out", (tmp.path() / "inj").string()});
  unsetenv(kDataRootEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.path() / "inj" / "manifest.json"));
}

TEST_CASE("pipeline writes run records and refuses reruns") {
  TempDir tmp;
  const std::string corp = (tmp.path() / "corp").string();
  REQUIRE(cli({"make-corpus", "--out", corp, "--train-per-class", "4", "--test-per-class", "2"})
              .code == 0);

  const std::string inj = (tmp.path() / "inj").string();
  Result r = cli({"inject", "--data", corp, "--out", inj, "--shortcut", "location_dot"});
  REQUIRE(r.code == 0);
  auto manifest = nlohmann::json::parse(slurp(fs::path(inj) / "manifest.json"));
  CHECK(manifest.at("records").size() == 60);

  write_file(tmp.path() / "c.json", R"({"epochs": 1, "batch_size": 8, "deterministic": true})");
  const std::string run = (tmp.path() / "run").string();
  r = cli({"train", "--data", inj, "--config", (tmp.path() / "c.json").string(), "--out", run});
  REQUIRE(r.code == 0);
  RunRecord rec = run_record_from_json(nlohmann::json::parse(slurp(fs::path(run) / "run.json")));
  CHECK(rec.command == "train");
  CHECK(rec.status == "ok");
  CHECK(rec.version == version_string());
  CHECK_FALSE(rec.corpus_checksum.empty());
  CHECK(rec.config.at("epochs") == 1);
  for (const char* f : {"classifier.pt", "lens.pt", "history.ndjson", "config.json", "run.json"}) {
    const std::string p = (fs::path(run) / f).string();
    CHECK(std::find(rec.outputs.begin(), rec.outputs.end(), p) != rec.outputs.end());
    CHECK(fs::exists(p));
  }
  CHECK_FALSE(fs::exists(fs::path(run) / ".slens.lock"));

  const std::string before = slurp(fs::path(run) / "run.json");
  r = cli({"train", "--data", inj, "--config", (tmp.path() / "c.json").string(), "--out", run});
  CHECK(r.code == 2);
  CHECK(slurp(fs::path(run) / "run.json") == before);

  const std::string rep = (tmp.path() / "eval" / "report.json").string();
  r = cli({"evaluate", "--checkpoint", run, "--data", corp, "--out", rep, "--shortcut",
           "location_dot"});
  REQUIRE(r.code == 0);
  auto report = nlohmann::json::parse(slurp(rep));
  CHECK(report.at("clean_accuracy").get<double>() >= 0.0);
  CHECK(report.contains("mean_attention"));
  CHECK(report.contains("shortcut_accuracy"));
  CHECK(fs::exists(tmp.path() / "eval" / "run.json"));

  const std::string grid = (tmp.path() / "vis" / "grid.png").string();
  CHECK(cli({"visualize", "--checkpoint", run, "--images", corp + "/test", "--out", grid,
             "--limit", "3"})
            .code == 0);
  CHECK(fs::exists(grid));

  fs::path img;
  for (const auto& e : fs::recursive_directory_iterator(fs::path(corp) / "test"))
    if (e.path().extension() == ".png") img = e.path();
  const std::string cam = (tmp.path() / "cam" / "cam.png").string();
  CHECK(cli({"gradcam", "--checkpoint", run, "--image", img.string(), "--class", "3", "--out",
             cam})
            .code == 0);
  CHECK(fs::exists(cam));
  CHECK(cli({"gradcam", "--checkpoint", run, "--image", img.string(), "--class", "10", "--out",
             (tmp.path() / "cam2" / "c.png").string()})
            .code == 1);
}

TEST_CASE("run directory lock blocks a second writer") {
  TempDir tmp;
  {
    RunDirectory a(tmp.path() / "r", "x", {});
    CHECK_THROWS_AS(RunDirectory(tmp.path() / "r", "y", {}), IoError);
    a.finish();
  }
  CHECK_THROWS_AS(RunDirectory(tmp.path() / "r", "z", {}), IoError);
  auto rec = run_record_from_json(nlohmann::json::parse(slurp(tmp.path() / "r" / "run.json")));
  CHECK(rec.command == "x");
}

TEST_CASE("run record json round trip") {
  RunRecord r;
  r.command = "sweep-rho";
  r.argv = {"slens", "sweep-rho"};
  r.config = {{"rho", 0.025}};
  r.seed = 99;
  r.version = "1.2.3";
  r.corpus_checksum = "abc";
  r.started_at = "2026-01-01T00:00:00Z";
  r.wall_seconds = 1.5;
  r.outputs = {"a", "b"};
  r.results = {{"mean", 0.5}};
  r.status = "ok";
  RunRecord back = run_record_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("reproduce-table dry run describes the full-scale protocol") {
  Result r = cli({"reproduce-table", "--preset", "paper-cifar", "--dry-run"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("config").at("architecture") == "resnet18");
  CHECK(j.at("config").at("epochs") == 30);
  CHECK(j.at("runs") == 3);
  CHECK(cli({"reproduce-table", "--preset", "nope", "--dry-run"}).code == 1);
}
