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

#include <cstdint>
#include <optional>
#include <string>

#include "lhfc/autograd.hpp"

namespace lhfc {

// Quantization operator and its training-time relaxations. Only kHard may be
// used when producing a bitstream.
enum class QuantMode { kNoise, kSte, kHybrid, kHard };

QuantMode parse_quant_mode(const std::string& name);
std::string to_string(QuantMode mode);

// The two consumers of a quantized latent: the rate term and everything
// downstream of it (synthesis, contexts). They differ only in hybrid mode.
struct Quantized {
  Var rate;
  Var distortion;
};

// hard:   round(y - mu) + mu, round half away from zero
// noise:  y + u, u ~ U[-0.5, 0.5) from a generator seeded with `seed`
// ste:    hard forward, identity gradient
// hybrid: noise for the rate path, ste for the distortion path
Quantized quantize(Var y, QuantMode mode, Var mean_offset = {},
                   std::optional<std::uint64_t> seed = std::nullopt);

// Tensor-level hard quantizer used by the codec.
Tensor quantize_hard(const Tensor& y, const Tensor* mean_offset = nullptr);

// Deterministic U[-0.5, 0.5) noise.
Tensor uniform_noise(const Shape& shape, std::uint64_t seed);

}  // namespace lhfc
