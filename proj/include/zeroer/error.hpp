// Copyright 2026 The ZeroER Authors.
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

namespace zeroer {

/// Base of every error raised by the library. Each subclass maps to one
/// process exit code in the command line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, unresolvable ids, bad configuration values.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// One of the two classes ended up empty (at initialization or mid-fit).
class DegenerateInitError : public Error {
 public:
  using Error::Error;
};

/// Non positive definite covariance and similar numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace zeroer
