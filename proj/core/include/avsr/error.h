// Copyright 2026 The avsr Authors
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

#ifndef AVSR_ERROR_H_
#define AVSR_ERROR_H_

#include <stdexcept>
#include <string>

namespace avsr {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, inconsistent shapes, violated preconditions.
// The CLI maps this to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numerical or runtime failure during a well-formed computation
// (non-finite loss, zero-norm vector in a gradient, IO failure).
// The CLI maps this to exit code 2.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace avsr

#endif  // AVSR_ERROR_H_
