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

#include "lhfc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lhfc/error.hpp"

namespace lhfc {

namespace {

constexpr double kPeak2 = 255.0 * 255.0;

void check_loss_args(double lambda, double pixel_count) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("lambda must be a finite non-negative number");
  }
  if (!(pixel_count > 0.0)) throw ArgumentError("pixel count must be positive");
}

}  // namespace

RDLossBreakdown rd_loss(const Tensor& x, const Tensor& x_hat, double bits_y,
                        double bits_z, double lambda, double pixel_count) {
  if (!(x.shape() == x_hat.shape())) {
    throw ShapeError("rd_loss: " + x.shape().str() + " vs " + x_hat.shape().str());
  }
  check_loss_args(lambda, pixel_count);
  RDLossBreakdown r;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_hat[i] - x[i];
    acc += d * d;
  }
  r.mse = acc / static_cast<double>(x.size());
  r.bpp_y = bits_y / pixel_count;
  r.bpp_z = bits_z / pixel_count;
  r.lambda = lambda;
  r.total = lambda * kPeak2 * r.mse + r.bpp_y + r.bpp_z;
  return r;
}

RDLossVar rd_loss(Var x, Var x_hat, Var bits_y, Var bits_z, double lambda,
                  double pixel_count) {
  if (!(x.shape() == x_hat.shape())) {
    throw ShapeError("rd_loss: " + x.shape().str() + " vs " + x_hat.shape().str());
  }
  check_loss_args(lambda, pixel_count);
  Var mse = mean(square(x_hat - x));
  Var rate = scale(bits_y + bits_z, 1.0 / pixel_count);
  RDLossVar out;
  out.total = scale(mse, lambda * kPeak2) + rate;
  out.parts.mse = mse.value()[0];
  out.parts.bpp_y = bits_y.value()[0] / pixel_count;
  out.parts.bpp_z = bits_z.value()[0] / pixel_count;
  out.parts.lambda = lambda;
  out.parts.total = lambda * kPeak2 * out.parts.mse + out.parts.bpp_y + out.parts.bpp_z;
  return out;
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    c.lambda_index = j.value("lambda_index", -1);
    c.lambda = j.value("lambda", c.lambda);
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.crop = j.value("crop", c.crop);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    c.quant = parse_quant_mode(j.value("quant", std::string("hybrid")));
    c.log_every = j.value("log_every", c.log_every);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training config: ") + e.what());
  }
  if (c.lambda_index >= 0) {
    if (c.lambda_index >= static_cast<int>(kLambdaGrid.size())) {
      throw FormatError("training config: lambda_index out of range");
    }
    c.lambda = kLambdaGrid[c.lambda_index];
  }
  if (c.steps < 0 || c.batch < 1 || c.crop < 1 || !(c.lr >= 0.0) ||
      c.log_every < 1) {
    throw FormatError("training config: steps, batch, crop, lr or log_every out of range");
  }
  if (c.quant == QuantMode::kHard) {
    throw FormatError("training config: hard quantization cannot be trained");
  }
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open training config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["lambda"] = c.lambda;
  if (c.lambda_index >= 0) j["lambda_index"] = c.lambda_index;
  j["steps"] = c.steps;
  j["batch"] = c.batch;
  j["crop"] = c.crop;
  j["lr"] = c.lr;
  j["seed"] = c.seed;
  j["quant"] = to_string(c.quant);
  j["log_every"] = c.log_every;
  return j.dump(2);
}

RDLossBreakdown train_step(Model& model, AdamState& state, const Tensor& batch,
                           const TrainConfig& config, std::uint64_t noise_seed) {
  const Shape bs = batch.shape();
  Tape tape;
  const ParamVars vars = bind_params(tape, model.params, true);
  const RDForward f =
      rd_forward(tape, batch, vars, model.config, config.quant, noise_seed);
  const double pixels = static_cast<double>(bs.n) * bs.h * bs.w;
  const RDLossVar loss = rd_loss(tape.constant(batch), f.x_hat, f.bits_y,
                                 f.bits_z, config.lambda, pixels);
  const RDLossBreakdown& p = loss.parts;
  if (!std::isfinite(loss.total.value()[0])) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "non-finite training loss at Adam step %lld: total=%g mse=%g "
                  "bpp_y=%g bpp_z=%g lambda=%g",
                  static_cast<long long>(state.t + 1), loss.total.value()[0],
                  p.mse, p.bpp_y, p.bpp_z, p.lambda);
    throw TrainingError(buf);
  }
  const Gradients grads = tape.backward(loss.total);

  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (auto& [name, value] : model.params.tensors) {
    const Tensor g = grads.of(vars.at(name));
    auto [mit, fresh_m] = state.m.try_emplace(name, Tensor(value.shape(), 0.0));
    auto [vit, fresh_v] = state.v.try_emplace(name, Tensor(value.shape(), 0.0));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double step = (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
      value[i] -= config.lr * step;
    }
  }
  return p;
}

Tensor load_crop(const Image8& image, int crop, std::uint64_t seed) {
  if (crop <= 0) throw ArgumentError("crop must be positive");
  const Tensor full = to_tensor(image);
  // Replicate-pad up to the crop size.
  const int h = std::max(image.height, crop);
  const int w = std::max(image.width, crop);
  std::mt19937_64 rng(seed);
  const int oy = static_cast<int>(rng() % static_cast<std::uint64_t>(h - crop + 1));
  const int ox = static_cast<int>(rng() % static_cast<std::uint64_t>(w - crop + 1));
  Tensor out(Shape{1, 3, crop, crop});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < crop; ++y)
      for (int x = 0; x < crop; ++x)
        out.at(0, c, y, x) = full.at(0, c, std::min(oy + y, image.height - 1),
                                     std::min(ox + x, image.width - 1));
  return out;
}

Tensor load_crop(const std::string& path, int crop, std::uint64_t seed) {
  return load_crop(read_ppm(path), crop, seed);
}

std::vector<RDLossBreakdown> train(Model& model, const TrainConfig& config,
                                   const std::vector<Image8>& images,
                                   const StepCallback& on_step) {
  if (images.empty()) throw ArgumentError("train: no images");
  if (config.crop % model.config.pad_multiple() != 0) {
    throw ArgumentError("train: crop " + std::to_string(config.crop) +
                        " is not a multiple of the model's total stride " +
                        std::to_string(model.config.pad_multiple()));
  }
  if (config.lambda_index >= 0) model.lambda_index = config.lambda_index;
  AdamState state;
  std::mt19937_64 rng(config.seed);
  std::vector<RDLossBreakdown> history;
  for (int step = 0; step < config.steps; ++step) {
    Tensor batch(Shape{config.batch, 3, config.crop, config.crop});
    for (int b = 0; b < config.batch; ++b) {
      const auto& img = images[rng() % images.size()];
      const Tensor crop = load_crop(img, config.crop, rng());
      std::copy(crop.data().begin(), crop.data().end(),
                batch.data().begin() + static_cast<std::ptrdiff_t>(b) * crop.size());
    }
    const RDLossBreakdown loss = train_step(model, state, batch, config, rng());
    history.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  return history;
}

std::string training_log_header() { return "step,mse,bpp_y,bpp_z,total\n"; }

std::string training_log_row(int step, const RDLossBreakdown& l) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", step, l.mse,
                l.bpp_y, l.bpp_z, l.total);
  return buf;
}

}  // namespace lhfc
