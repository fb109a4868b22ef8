// Copyright 2026 The hybridcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hybridcal {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateGeometry,
  kDimensionMismatch,
  kInsufficientData,
  kSingularProblem,
  kNonFinite,
  kInvariantViolation,
  kConfig,
  kIo,
  kStageFailure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Normal matrix could not be factored; carries the condition estimate of the
/// Jacobi-scaled normal matrix at the failing iterate.
class SingularProblemError : public Error {
 public:
  SingularProblemError(const std::string& what, double condition)
      : Error(ErrorCode::kSingularProblem, what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Schema or value problem in a config/bundle/report file. `field` is a
/// JSON-pointer-like path to the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorCode::kConfig, field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Stage { kInitialEstimate, kJoint };

/// Wraps any failure raised inside one calibration stage.
class StageError : public Error {
 public:
  StageError(Stage stage, ErrorCode cause, const std::string& what)
      : Error(ErrorCode::kStageFailure, what), stage_(stage), cause_(cause) {}

  Stage stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  Stage stage_;
  ErrorCode cause_;
};

}  // namespace hybridcal
