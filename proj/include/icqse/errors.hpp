// Copyright 2026 The icqse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

namespace icqse {

/// Operand sizes disagree (qubit counts, vector lengths, table shapes).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar argument is outside its admissible range.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A request would exceed a hard resource cap (qubits, memory).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-convergence, singular normalization, rank loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, file or text input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent intermediate data (e.g. a Pauli missing from an evaluation table).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace log {

inline bool quiet() {
  static const bool q = [] {
    const char* v = std::getenv("ICQSE_QUIET");
    return v != nullptr && std::string(v) != "0";
  }();
  return q;
}

inline void warn(const std::string& msg) {
  if (!quiet()) std::cerr << "[icqse] warning: " << msg << '\n';
}

inline void info(const std::string& msg) {
  if (!quiet()) std::cerr << "[icqse] " << msg << '\n';
}

}  // namespace log
}  // namespace icqse
