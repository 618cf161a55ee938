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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lhfc/autograd.hpp"
#include "lhfc/image_io.hpp"
#include "lhfc/model.hpp"
#include "lhfc/quantizer.hpp"

namespace lhfc {

// Lagrange multipliers addressed by lambda_index.
inline constexpr std::array<double, 6> kLambdaGrid{0.0018, 0.0035, 0.0067,
                                                   0.013,  0.025,  0.0483};

// total = lambda * 255^2 * mse + bpp_y + bpp_z, mse on the [0, 1] scale.
struct RDLossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double bpp_y = 0.0;
  double bpp_z = 0.0;
  double lambda = 0.0;
};

RDLossBreakdown rd_loss(const Tensor& x, const Tensor& x_hat, double bits_y,
                        double bits_z, double lambda, double pixel_count);

struct RDLossVar {
  Var total;
  RDLossBreakdown parts;
};
// Differentiable form; x and x_hat are the unpadded images.
RDLossVar rd_loss(Var x, Var x_hat, Var bits_y, Var bits_z, double lambda,
                  double pixel_count);

struct TrainConfig {
  double lambda = 0.01;
  int lambda_index = -1;  // when >= 0, lambda comes from kLambdaGrid
  int steps = 1000;
  int batch = 1;
  int crop = 256;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  QuantMode quant = QuantMode::kHybrid;
  int log_every = 1;
};

TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// One forward, one backward and one Adam update. Throws TrainingError with
// the per-term values when the loss is not finite; params are untouched then.
RDLossBreakdown train_step(Model& model, AdamState& state, const Tensor& batch,
                           const TrainConfig& config, std::uint64_t noise_seed);

// Random crop x crop window (replicate-padded first when the image is
// smaller), values byte / 255.
Tensor load_crop(const Image8& image, int crop, std::uint64_t seed);
Tensor load_crop(const std::string& path, int crop, std::uint64_t seed);

using StepCallback = std::function<void(int step, const RDLossBreakdown&)>;

// Trains on crops drawn from `images`; returns the loss of every step.
std::vector<RDLossBreakdown> train(Model& model, const TrainConfig& config,
                                   const std::vector<Image8>& images,
                                   const StepCallback& on_step = {});

// CSV log with columns step, mse, bpp_y, bpp_z, total.
std::string training_log_header();
std::string training_log_row(int step, const RDLossBreakdown& loss);

}  // namespace lhfc
