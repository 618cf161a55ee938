// Copyright 2026 The lhfc Authors. All Rights Reserved.
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
#include <stdexcept>
#include <string>

namespace lhfc {

// Base class for every error raised by the library. Callers that only care
// about "something went wrong" catch this; the CLI maps subclasses to exit
// codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or parameter shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument outside of shape checks (stride 0, bad mode, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A context slice was requested before its causal predecessors were decoded.
class CausalityError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated input data (bitstreams, checkpoints, images, JSON).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Entropy decoding failed. Carries the payload byte offset where the
// inconsistency was detected.
class DecodeError : public FormatError {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : FormatError(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lhfc
