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

#include <stdexcept>
#include <string>

namespace slens {

// Base of every error this library raises. The CLI maps validation-type
// errors to exit code 1 and runtime failures to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_validation() const { return false; }
};

// A ShortcutSpec that cannot be applied to the data it was given.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return true; }
};

// A config value outside its documented domain. `field` names the key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }
  bool is_validation() const override { return true; }

 private:
  std::string field_;
};

// Shapes of operands do not agree.
class ContractError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return true; }
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Raised by the training loop when a loss component stops being finite.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace slens
