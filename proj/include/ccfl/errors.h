/*
 * Copyright 2026 The ccfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CCFL_ERRORS_H_
#define CCFL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace ccfl {

// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kInternal = 1,
  kConfig = 2,
  kDivergence = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

// Mismatched vector or matrix shapes.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorCategory::kInternal, "dimension mismatch: " + what) {}
};

// A NaN/Inf produced or supplied where finite values are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::kInternal, "non-finite value: " + what) {}
};

// Violated precondition on an argument (bad size, out-of-range budget, ...).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(ErrorCategory::kConfig, "config field '" + field + "': " + what),
        field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(ErrorCategory::kIo, path + ": " + what), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// A local trajectory left the finite / |x| <= 1e8 region. Method, round and
// client are filled in by the coordinator; step by local training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string method, int round, int client, int step)
      : Error(ErrorCategory::kDivergence,
              "divergence: method=" + method + " round=" +
                  std::to_string(round) + " client=" + std::to_string(client) +
                  " step=" + std::to_string(step)),
        method_(std::move(method)),
        round_(round),
        client_(client),
        step_(step) {}

  const std::string& method() const { return method_; }
  int round() const { return round_; }
  int client() const { return client_; }
  int step() const { return step_; }

 private:
  std::string method_;
  int round_;
  int client_;
  int step_;
};

// Estimation requested with no usable stored state.
class StateError : public Error {
 public:
  explicit StateError(const std::string& what)
      : Error(ErrorCategory::kInternal, what) {}
};

}  // namespace ccfl

#endif  // CCFL_ERRORS_H_
