// Copyright 2026 The dpglm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGLM_COMMON_HPP
#define DPGLM_COMMON_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace dpglm {

// Raised when input data (CSV files, release files) is malformed. The code
// distinguishes the failure classes callers may want to branch on.
class DataError : public std::runtime_error {
 public:
  enum class Code {
    missing_target,
    non_numeric,
    empty_file,
    bad_format,
  };

  DataError(Code code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised when an iterative numerical procedure fails to converge or a
// factorization cannot be completed.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& message)
      : std::runtime_error(message) {}
};

// Formats a double with 17 significant digits, enough to round-trip any
// IEEE-754 binary64 value through decimal text.
inline std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return std::string(buffer);
}

}  // namespace dpglm

#endif  // DPGLM_COMMON_HPP
