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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lhfc/error.hpp"
#include "lhfc/trainer.hpp"
#include "test_util.hpp"

namespace lhfc {
namespace {

using testing::random_tensor;

TEST(RdLoss, PerfectReconstructionAtZeroRateIsZero) {
  const Tensor x = random_tensor(Shape{1, 3, 4, 4}, 1, 0.0, 1.0);
  const RDLossBreakdown r = rd_loss(x, x, 0.0, 0.0, 0.01, 16.0);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.mse, 0.0);
}

TEST(RdLoss, PinnedScalingConvention) {
  const Tensor x(Shape{1, 3, 4, 4}, 0.5);
  const Tensor xh(Shape{1, 3, 4, 4}, 0.5 + 1.0 / 255.0);
  // mse = 1/255^2, bits 10 + 6 over 16 pixels = 1 bpp.
  const RDLossBreakdown r = rd_loss(x, xh, 10.0, 6.0, 0.01, 16.0);
  EXPECT_NEAR(r.mse, 1.0 / (255.0 * 255.0), 1e-18);
  EXPECT_DOUBLE_EQ(r.bpp_y, 10.0 / 16.0);
  EXPECT_DOUBLE_EQ(r.bpp_z, 6.0 / 16.0);
  EXPECT_NEAR(r.total, 1.01, 1e-12);
  EXPECT_DOUBLE_EQ(r.total, r.lambda * 255.0 * 255.0 * r.mse + r.bpp_y + r.bpp_z);
}

TEST(RdLoss, VarFormMatchesTensorForm) {
  const Tensor x = random_tensor(Shape{2, 3, 4, 4}, 2, 0.0, 1.0);
  const Tensor xh = random_tensor(Shape{2, 3, 4, 4}, 3, 0.0, 1.0);
  Tape tape;
  const RDLossVar v = rd_loss(tape.constant(x), tape.constant(xh), tape.constant(Tensor(Shape{1, 1, 1, 1}, 40.0)),
                              tape.constant(Tensor(Shape{1, 1, 1, 1}, 7.0)), 0.0067, 32.0);
  const RDLossBreakdown t = rd_loss(x, xh, 40.0, 7.0, 0.0067, 32.0);
  EXPECT_NEAR(v.total.value()[0], t.total, 1e-12);
  EXPECT_NEAR(v.parts.total, t.total, 1e-12);
  EXPECT_NEAR(v.parts.mse, t.mse, 1e-15);
}

TEST(LoadCrop, FullSizeIsIdentityAndBytesMapExactly) {
  Image8 img = testing::noise_image(4, 8, 8);
  img.rgb[0] = 255;
  img.rgb[1] = 0;
  const Tensor t = load_crop(img, 8, 99);
  EXPECT_EQ(testing::values(t), testing::values(to_tensor(img)));
  // Interleaved RGB: byte 0 is red at (0, 0), byte 1 green at (0, 0).
  EXPECT_EQ(t.at(0, 0, 0, 0), 1.0);
  EXPECT_EQ(t.at(0, 1, 0, 0), 0.0);
  for (double v : t.data()) EXPECT_EQ(v * 255.0, std::round(v * 255.0));
}

TEST(LoadCrop, SeededOffsetsAreReproducible) {
  const Image8 img = testing::noise_image(5, 40, 50);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(testing::values(load_crop(img, 16, seed)), testing::values(load_crop(img, 16, seed)));
  }
  EXPECT_NE(testing::values(load_crop(img, 16, 1)), testing::values(load_crop(img, 16, 2)));
}

TEST(LoadCrop, SmallImagesAreReplicatePadded) {
  const Image8 img = testing::noise_image(6, 5, 3);
  const Tensor t = load_crop(img, 8, 0);
  const Tensor src = to_tensor(img);
  EXPECT_EQ(t.at(0, 2, 7, 7), src.at(0, 2, 4, 2));
  EXPECT_EQ(t.at(0, 1, 0, 6), src.at(0, 1, 0, 2));
}

TEST(TrainStep, ZeroLearningRateLeavesParametersBitExact) {
  Model m = init_model(toy_config(), 3);
  const Model before = m;
  AdamState adam;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.crop = 32;
  train_step(m, adam, load_crop(testing::textured_image(1, 32, 32), 32, 0), cfg, 11);
  for (const auto& [name, t] : m.params.tensors) {
    EXPECT_EQ(testing::values(t), testing::values(before.params.tensors.at(name))) << name;
  }
}

TEST(TrainStep, FirstAdamStepIsBiasCorrectedSignStep) {
  Model m = init_model(toy_config(), 4);
  const Model before = m;
  const Tensor x = load_crop(testing::textured_image(2, 32, 32), 32, 0);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  // Independent gradient of the same objective and noise draw.
  std::map<std::string, Tensor> grads;
  {
    Tape tape;
    const ParamVars vars = bind_params(tape, m.params, true);
    const RDForward f = rd_forward(tape, x, vars, m.config, cfg.quant, 12);
    const RDLossVar l = rd_loss(tape.constant(x), f.x_hat, f.bits_y, f.bits_z, cfg.lambda, 32.0 * 32.0);
    const Gradients g = tape.backward(l.total);
    for (const auto& [name, v] : vars) grads[name] = g.of(v);
  }
  AdamState adam;
  train_step(m, adam, x, cfg, 12);
  EXPECT_EQ(adam.t, 1);
  std::size_t moved = 0;
  for (const auto& [name, t] : m.params.tensors) {
    const Tensor& b = before.params.tensors.at(name);
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      // m_hat = g and v_hat = g^2 after one step.
      const double expected = b[i] - cfg.lr * g[i] / (std::abs(g[i]) + 1e-8);
      EXPECT_NEAR(t[i], expected, 1e-12) << name << "[" << i << "]";
      if (t[i] != b[i]) ++moved;
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(TrainStep, NonFiniteLossAbortsWithoutTouchingParameters) {
  Model m = init_model(tiny_config(), 5);
  const Model before = m;
  AdamState adam;
  TrainConfig cfg;
  Tensor x = load_crop(testing::textured_image(3, 32, 32), 32, 0);
  x[17] = std::nan("");
  try {
    train_step(m, adam, x, cfg, 1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("bpp_y="), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("mse="), std::string::npos);
  }
  EXPECT_EQ(adam.t, 0);
  for (const auto& [name, t] : m.params.tensors) {
    EXPECT_EQ(testing::values(t), testing::values(before.params.tensors.at(name)));
  }
}

TEST(Train, SameSeedSameTrajectory) {
  const std::vector<Image8> images{testing::textured_image(7, 40, 40), testing::textured_image(8, 32, 48)};
  TrainConfig cfg;
  cfg.steps = 15;
  cfg.crop = 32;
  cfg.lr = 1e-3;
  cfg.seed = 21;
  Model a = init_model(toy_config(), 6);
  Model b = init_model(toy_config(), 6);
  const auto la = train(a, cfg, images);
  const auto lb = train(b, cfg, images);
  ASSERT_EQ(la.size(), 15u);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].total, lb[i].total) << i;
  for (const auto& [name, t] : a.params.tensors) {
    EXPECT_EQ(testing::values(t), testing::values(b.params.tensors.at(name)));
  }
  cfg.seed = 22;
  Model c = init_model(toy_config(), 6);
  EXPECT_NE(train(c, cfg, images).back().total, la.back().total);
}

TEST(Train, OverfitsOneImageInFiveHundredSteps) {
  const std::vector<Image8> images{testing::smooth_image(32)};
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.crop = 32;
  cfg.lr = 1e-3;
  cfg.lambda = 0.01;
  Model m = init_model(toy_config(), 1);
  const auto losses = train(m, cfg, images);
  EXPECT_LE(losses.back().total, 0.5 * losses.front().total)
      << "step 0 " << losses.front().total << " last " << losses.back().total;
}

TEST(Train, RejectsCropNotMultipleOfStride) {
  Model m = init_model(toy_config(), 1);
  TrainConfig cfg;
  cfg.crop = 24;
  EXPECT_THROW(train(m, cfg, {testing::smooth_image(32)}), ArgumentError);
  EXPECT_THROW(train(m, cfg, {}), ArgumentError);
}

TEST(EndToEnd, LossGradientMatchesFiniteDifferences) {
  const HFTConfig cfg = tiny_config();
  Model m = init_model(cfg, 9);
  const Tensor x = load_crop(testing::textured_image(9, 16, 16), 16, 0);
  auto loss_of = [&](bool grads, std::map<std::string, Tensor>* out) {
    Tape tape;
    const ParamVars vars = bind_params(tape, m.params, grads);
    const RDForward f = rd_forward(tape, x, vars, cfg, QuantMode::kNoise, 1234);
    const RDLossVar l = rd_loss(tape.constant(x), f.x_hat, f.bits_y, f.bits_z, 0.01, 256.0);
    if (grads) {
      const Gradients g = tape.backward(l.total);
      for (const auto& [name, v] : vars) (*out)[name] = g.of(v);
    }
    return l.total.value()[0];
  };
  std::map<std::string, Tensor> grads;
  loss_of(true, &grads);
  std::mt19937_64 rng(10);
  int checked = 0;
  for (auto& [name, t] : m.params.tensors) {
    const std::size_t i = rng() % t.size();
    const double numeric = testing::central_difference([&] { return loss_of(false, nullptr); }, t[i], 1e-6);
    const double analytic = grads[name][i];
    EXPECT_LT(std::abs(analytic - numeric), 1e-3 * std::max(std::abs(numeric), 1e-3)) << name << "[" << i << "]";
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.lambda_index = 2;
  c.lambda = kLambdaGrid[2];
  c.steps = 12;
  c.crop = 64;
  c.quant = QuantMode::kNoise;
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(back.lambda, kLambdaGrid[2]);
  EXPECT_EQ(back.steps, 12);
  EXPECT_EQ(back.crop, 64);
  EXPECT_EQ(back.quant, QuantMode::kNoise);
  EXPECT_EQ(train_config_from_json(R"({"lambda_index": 5})").lambda, 0.0483);
  EXPECT_THROW(train_config_from_json(R"({"lambda_index": 6})"), FormatError);
  EXPECT_THROW(train_config_from_json(R"({"quant": "hard"})"), FormatError);
  EXPECT_THROW(train_config_from_json(R"({"steps": )"), FormatError);
}

TEST(TrainingLog, HeaderAndRow) {
  EXPECT_EQ(training_log_header(), "step,mse,bpp_y,bpp_z,total\n");
  RDLossBreakdown l;
  l.total = 1.5;
  const std::string row = training_log_row(3, l);
  EXPECT_EQ(row.rfind("3,", 0), 0u);
}

}  // namespace
}  // namespace lhfc
