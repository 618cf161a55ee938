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
#include <map>
#include <string>

#include "lhfc/autograd.hpp"
#include "lhfc/complexity.hpp"
#include "lhfc/hft.hpp"
#include "lhfc/quantizer.hpp"

namespace lhfc {

// A complete codec: architecture and every trained tensor.
struct Model {
  HFTConfig config;
  ModelParams params;
  int lambda_index = -1;  // position on the lambda grid, -1 when unknown
};

// Shapes of every parameter: transforms, factorized prior and context nets.
std::map<std::string, Shape> model_param_shapes(const HFTConfig& config);

Model init_model(const HFTConfig& config, std::uint64_t seed);

// Throws ShapeError when a parameter is missing, extra or mis-shaped.
void check_model(const Model& model);

// Layer table of a model for the complexity analyzer. Context networks are
// included; the fusion network runs once per parity.
ArchSpec arch_spec_from_config(const HFTConfig& config);

// Pads right and bottom by edge replication up to multiples of `multiple`.
Tensor pad_replicate(const Tensor& x, int multiple);

struct RDForward {
  Var x_hat;   // cropped to the input size, unclamped
  Var bits_y;  // scalar
  Var bits_z;  // scalar
  Var y;
  Var y_hat;   // distortion-path latent
  Var mu;
  Var sigma;
};

// Forward pass of the whole codec on an unpadded image batch with values in
// [0, 1]. `seed` drives the noise of noise/hybrid quantization. kHard needs
// parameters bound without gradients.
RDForward rd_forward(Tape& tape, const Tensor& x, const ParamVars& params,
                     const HFTConfig& config, QuantMode mode,
                     std::uint64_t seed);

}  // namespace lhfc
