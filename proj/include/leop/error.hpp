// Copyright 2026 The Leop Authors.
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

namespace leop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; line is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A precondition on arguments or configuration was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Overflow or NaN inside a numerical routine; layer is -1 outside the network.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer = -1)
      : Error(layer >= 0 ? what + " (layer " + std::to_string(layer) + ")" : what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

/// API misuse such as requesting gradients before a recorded forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace leop
