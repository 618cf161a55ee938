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

#include "lhfc/quantizer.hpp"

#include <cmath>
#include <random>

#include "lhfc/error.hpp"

namespace lhfc {

QuantMode parse_quant_mode(const std::string& name) {
  if (name == "noise") return QuantMode::kNoise;
  if (name == "ste") return QuantMode::kSte;
  if (name == "hybrid") return QuantMode::kHybrid;
  if (name == "hard") return QuantMode::kHard;
  throw ArgumentError("unknown quantization mode '" + name + "'");
}

std::string to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::kNoise: return "noise";
    case QuantMode::kSte: return "ste";
    case QuantMode::kHybrid: return "hybrid";
    case QuantMode::kHard: return "hard";
  }
  return "?";
}

Tensor uniform_noise(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor u(shape);
  for (double& v : u.data()) {
    v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  }
  return u;
}

Tensor quantize_hard(const Tensor& y, const Tensor* mean_offset) {
  if (mean_offset && !(mean_offset->shape() == y.shape())) {
    throw ShapeError("quantize: mean offset " + mean_offset->shape().str() +
                     " vs latent " + y.shape().str());
  }
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double mu = mean_offset ? (*mean_offset)[i] : 0.0;
    out[i] = std::round(y[i] - mu) + mu;
  }
  return out;
}

namespace {

Var ste(Var y, Var mu) {
  if (!mu.valid()) return round_ste(y);
  return round_ste(y - mu) + mu;
}

Var noisy(Var y, std::optional<std::uint64_t> seed) {
  if (!seed) {
    throw ArgumentError("noise and hybrid quantization need an rng seed");
  }
  return y + y.tape()->constant(uniform_noise(y.shape(), *seed));
}

}  // namespace

Quantized quantize(Var y, QuantMode mode, Var mean_offset,
                   std::optional<std::uint64_t> seed) {
  if (mean_offset.valid() && !(mean_offset.shape() == y.shape())) {
    throw ShapeError("quantize: mean offset " + mean_offset.shape().str() +
                     " vs latent " + y.shape().str());
  }
  switch (mode) {
    case QuantMode::kHard: {
      if (y.requires_grad() || mean_offset.requires_grad()) {
        throw ArgumentError(
            "hard quantization is not differentiable; use ste, noise or "
            "hybrid on a training tape");
      }
      const Tensor* mu = mean_offset.valid() ? &mean_offset.value() : nullptr;
      Var q = y.tape()->constant(quantize_hard(y.value(), mu));
      return {q, q};
    }
    case QuantMode::kSte: {
      Var q = ste(y, mean_offset);
      return {q, q};
    }
    case QuantMode::kNoise: {
      Var q = noisy(y, seed);
      return {q, q};
    }
    case QuantMode::kHybrid:
      return {noisy(y, seed), ste(y, mean_offset)};
  }
  throw ArgumentError("unknown quantization mode");
}

}  // namespace lhfc
