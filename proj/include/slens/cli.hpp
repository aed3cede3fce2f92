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
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace slens {

constexpr const char* kDataRootEnv = "SLENS_DATA_ROOT";
const char* version_string();

struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string version;
  std::string corpus_checksum;
  std::string started_at;  // UTC, ISO 8601
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  nlohmann::json results = nlohmann::json::object();
  std::string status;  // "ok" or "failed: <reason>"
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

// Owns one run directory for the lifetime of a command: holds a lock file,
// refuses directories that already hold a record, and writes run.json on
// finish() or, failing that, on destruction.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path dir, std::string command, std::vector<std::string> argv);
  ~RunDirectory();
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  RunRecord& record() { return record_; }
  // Path of an artifact inside the directory, registered as an output.
  std::filesystem::path artifact(const std::string& name);
  void add_output(const std::filesystem::path& p);
  void finish(const std::string& status = "ok");

 private:
  std::filesystem::path dir_;
  std::filesystem::path lock_;
  RunRecord record_;
  double t0_ = 0.0;
  bool finished_ = false;
};

// Runs the command line; returns 0 on success, 1 on usage or validation
// errors, 2 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slens
