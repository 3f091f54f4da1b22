/*
 * Copyright (c) 2026 The ercfuse Authors
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

namespace ercfuse {

/// Failure categories. The C API maps each onto a status code and the CLI
/// onto its exit code.
enum class ErrorKind {
  kDimension,    // operand shapes disagree
  kContract,     // caller broke a documented precondition
  kDegenerate,   // softmax over a fully masked row
  kConfig,       // invalid hyperparameter or option
  kValidation,   // dataset content violates an invariant
  kParse,        // malformed input text
  kIo,           // file could not be opened/written
  kState,        // optimizer state does not match parameters
  kNumerical,    // NaN/Inf encountered
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace ercfuse
