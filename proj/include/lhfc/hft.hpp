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
#include <vector>

#include "lhfc/autograd.hpp"
#include "lhfc/tensor.hpp"

namespace lhfc {

// Architecture of one codec model: the hierarchical transforms plus the
// hyperprior and context-model widths. Serialized as JSON (see README).
struct HFTConfig {
  std::string name = "custom";
  std::uint16_t model_id = 0;
  int base_channels = 64;     // N, channels of the first stage
  int stages = 4;             // number of stride-2 stages
  int latent_channels = 320;  // M, channels of the final stage
  int kernel = 5;             // kernel of the strided (transposed) convs
  int res_blocks_per_stage = 2;
  // Optional per-stage override of res_blocks_per_stage (size == stages).
  std::vector<int> stage_res_blocks;
  int hyper_channels = 192;  // M_z
  // Channel-group sizes of the context model; must sum to latent_channels.
  std::vector<int> groups{16, 16, 32, 256};
  int context_hidden = 256;  // hidden width of the 1x1 fusion network
  int context_kernel = 5;    // checkerboard context conv kernel

  int res_blocks(int stage) const;  // 1-based stage index
  int stage_channels(int stage) const;
  // Padding multiple covering analysis and hyper-analysis downsampling.
  int pad_multiple() const { return 1 << (stages + 2); }
  void validate() const;
};

// Built-in configurations.
HFTConfig reference_config();  // "loc-lic-ref"
HFTConfig toy_config();        // N=8, stages=3, M=16
HFTConfig tiny_config();       // N=4, stages=3, M=8

std::string config_to_json(const HFTConfig& config);
HFTConfig config_from_json(const std::string& text);
HFTConfig load_config(const std::string& path);

struct Dims {
  int c = 0;
  int h = 0;
  int w = 0;
  bool operator==(const Dims&) const = default;
};

enum class LayerKind { kConv, kConvTranspose, kResidual };

struct PlannedLayer {
  std::string id;
  LayerKind kind = LayerKind::kConv;
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  int stride = 1;
  int h_out = 0;
  int w_out = 0;
  bool activation = false;  // leaky rectifier after the layer
};

// Per-layer shape schedule of every transform of a model.
struct StagePlan {
  Dims input;
  Dims latent;
  Dims hyper_latent;
  std::vector<Dims> analysis_stages;  // output of each stage, in order
  std::vector<PlannedLayer> analysis;
  std::vector<PlannedLayer> synthesis;
  std::vector<PlannedLayer> hyper_analysis;
  std::vector<PlannedLayer> hyper_synthesis;
};

// Derives the shape schedule for an input of `input` (c, h, w). Height and
// width must be multiples of 2^stages; pad the image first otherwise.
StagePlan plan_stages(const HFTConfig& config, Dims input);

// Named parameter tensors of a model (weights are rank-4, biases (1,c,1,1)).
struct ModelParams {
  std::map<std::string, Tensor> tensors;
};

using ParamVars = std::map<std::string, Var>;

// Expected shapes of every transform parameter (analysis, synthesis, hyper).
std::map<std::string, Shape> transform_param_shapes(const HFTConfig& config);

// Puts every parameter on the tape as a leaf.
ParamVars bind_params(Tape& tape, const ModelParams& params,
                      bool requires_grad);

// Looks up a parameter and checks its shape; errors name the layer id.
Var param(const ParamVars& params, const std::string& name,
          const Shape& expected);

// Random initialization of the parameters listed in `shapes`, deterministic
// in `seed`.
void init_params(const std::map<std::string, Shape>& shapes,
                 std::uint64_t seed, ModelParams& out);

// y = g_a(x). `trace`, when given, receives the output dims of each stage.
Var analysis(Var x, const ParamVars& params, const StagePlan& plan,
             std::vector<Dims>* trace = nullptr);
// x_hat = g_s(y_hat), unclamped.
Var synthesis(Var y_hat, const ParamVars& params, const StagePlan& plan);

enum class HyperDirection { kAnalysis, kSynthesis };
// Analysis: y -> z at 1/4 resolution. Synthesis: z_hat -> 2M feature
// channels at y's resolution.
Var hyper_transform(Var input, const ParamVars& params, const StagePlan& plan,
                    HyperDirection direction);

}  // namespace lhfc
