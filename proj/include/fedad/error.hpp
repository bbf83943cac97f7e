// Copyright 2026 The fedad Authors
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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace fedad {

/// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Caller broke a precondition (dimension mismatch, empty input, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file. Line numbers are 1-based and count the header.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(std::size_t epoch, std::size_t batch,
                     std::optional<std::int64_t> tenant = std::nullopt)
      : std::runtime_error(describe(epoch, batch, tenant)),
        epoch_(epoch),
        batch_(batch),
        tenant_(tenant) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  std::optional<std::int64_t> tenant() const noexcept { return tenant_; }

  TrainingDivergence with_tenant(std::int64_t tenant) const {
    return TrainingDivergence(epoch_, batch_, tenant);
  }

 private:
  static std::string describe(std::size_t epoch, std::size_t batch,
                              std::optional<std::int64_t> tenant) {
    std::string msg = "non-finite loss at epoch " + std::to_string(epoch) +
                      ", batch " + std::to_string(batch);
    if (tenant) msg += " (tenant " + std::to_string(*tenant) + ")";
    return msg;
  }

  std::size_t epoch_;
  std::size_t batch_;
  std::optional<std::int64_t> tenant_;
};

/// Scoring requested before the window holds two observations.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariance could not be factored even after shrinkage.
class DegenerateCovariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedad
