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

#include "lhfc/error.hpp"
#include "lhfc/quantizer.hpp"
#include "test_util.hpp"

namespace lhfc {
namespace {

using testing::random_tensor;
using testing::values;

Tensor row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor(Shape{1, 1, 1, n}, std::move(v));
}

TEST(HardQuantizer, RoundsToNearestInteger) {
  const Tensor q = quantize_hard(row({0.4, 0.6, -1.5, 2.49, -0.2}));
  EXPECT_EQ(values(q), (std::vector<double>{0.0, 1.0, -2.0, 2.0, -0.0}));
}

TEST(HardQuantizer, MeanOffsetShiftsTheGrid) {
  const Tensor mu = row({0.3, 0.3, -0.25});
  const Tensor q = quantize_hard(row({0.4, 0.9, 1.0}), &mu);
  EXPECT_DOUBLE_EQ(q[0], 0.3);
  EXPECT_DOUBLE_EQ(q[1], 1.3);
  EXPECT_DOUBLE_EQ(q[2], 0.75);
}

TEST(HardQuantizer, IdempotentAndWithinHalfStep) {
  const Tensor y = random_tensor(Shape{2, 3, 8, 8}, 4, -20.0, 20.0);
  const Tensor mu = random_tensor(Shape{2, 3, 8, 8}, 5, -3.0, 3.0);
  const Tensor q = quantize_hard(y, &mu);
  const Tensor qq = quantize_hard(q, &mu);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_LE(std::abs(q[i] - y[i]), 0.5 + 1e-12);
    EXPECT_NEAR(qq[i], q[i], 1e-12);
    const double k = q[i] - mu[i];
    EXPECT_NEAR(k, std::round(k), 1e-12);
  }
}

TEST(HardQuantizer, RejectsGradientTape) {
  Tape tape;
  Var y = tape.leaf(row({0.5}), true);
  EXPECT_THROW(quantize(y, QuantMode::kHard), ArgumentError);
  Var c = tape.constant(row({1.7}));
  EXPECT_EQ(quantize(c, QuantMode::kHard).rate.value()[0], 2.0);
}

TEST(HardQuantizer, MeanShapeMismatch) {
  const Tensor mu(Shape{1, 1, 1, 2});
  EXPECT_THROW(quantize_hard(row({1.0}), &mu), ShapeError);
}

TEST(NoiseQuantizer, DeterministicBoundedAndUniform) {
  Tape tape;
  const Shape s{1, 4, 100, 250};
  Var y = tape.leaf(random_tensor(s, 6, -5.0, 5.0), true);
  const Quantized a = quantize(y, QuantMode::kNoise, {}, 77);
  const Quantized b = quantize(y, QuantMode::kNoise, {}, 77);
  const Quantized c = quantize(y, QuantMode::kNoise, {}, 78);
  EXPECT_EQ(values(a.rate.value()), values(b.rate.value()));
  EXPECT_NE(values(a.rate.value()), values(c.rate.value()));
  double mean = 0.0, var = 0.0;
  const std::size_t n = y.value().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = a.rate.value()[i] - y.value()[i];
    ASSERT_GE(u, -0.5);
    ASSERT_LT(u, 0.5);
    mean += u;
    var += u * u;
  }
  mean /= static_cast<double>(n);
  var = var / static_cast<double>(n) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(var, 1.0 / 12.0, 0.002);
}

TEST(NoiseQuantizer, NeedsSeed) {
  Tape tape;
  Var y = tape.leaf(row({0.1}), true);
  EXPECT_THROW(quantize(y, QuantMode::kNoise), ArgumentError);
  EXPECT_THROW(quantize(y, QuantMode::kHybrid), ArgumentError);
}

TEST(NoiseQuantizer, GradientIsIdentity) {
  Tape tape;
  Var y = tape.leaf(random_tensor(Shape{1, 2, 3, 3}, 8), true);
  const Quantized q = quantize(y, QuantMode::kNoise, {}, 1);
  const Tensor g = tape.backward(sum(q.rate)).of(y);
  for (double v : g.data()) EXPECT_EQ(v, 1.0);
}

TEST(SteQuantizer, ForwardIsHardBackwardIsIdentity) {
  Tape tape;
  const Tensor yv = random_tensor(Shape{1, 2, 4, 4}, 9, -4.0, 4.0);
  const Tensor muv = random_tensor(Shape{1, 2, 4, 4}, 10, -1.0, 1.0);
  Var y = tape.leaf(yv, true);
  Var mu = tape.leaf(muv, true);
  const Quantized q = quantize(y, QuantMode::kSte, mu);
  const Tensor hard = quantize_hard(yv, &muv);
  for (std::size_t i = 0; i < yv.size(); ++i) EXPECT_NEAR(q.distortion.value()[i], hard[i], 1e-12);
  const Gradients g = tape.backward(sum(q.distortion));
  const Tensor gy = g.of(y);
  const Tensor gmu = g.of(mu);
  for (double v : gy.data()) EXPECT_EQ(v, 1.0);
  // d/dmu [round(y - mu) + mu] with a pass-through round is zero.
  for (double v : gmu.data()) EXPECT_EQ(v, 0.0);
}

TEST(HybridQuantizer, RatePathNoisyDistortionPathRounded) {
  Tape tape;
  const Tensor yv = random_tensor(Shape{1, 3, 5, 5}, 11, -4.0, 4.0);
  Var y = tape.leaf(yv, true);
  const Quantized q = quantize(y, QuantMode::kHybrid, {}, 12);
  const Tensor noise = uniform_noise(yv.shape(), 12);
  const Tensor hard = quantize_hard(yv);
  for (std::size_t i = 0; i < yv.size(); ++i) {
    EXPECT_DOUBLE_EQ(q.rate.value()[i], yv[i] + noise[i]);
    EXPECT_EQ(q.distortion.value()[i], hard[i]);
  }
  const Tensor g = tape.backward(sum(q.rate) + sum(q.distortion)).of(y);
  for (double v : g.data()) EXPECT_EQ(v, 2.0);
}

TEST(QuantMode, NamesRoundTrip) {
  for (QuantMode m : {QuantMode::kNoise, QuantMode::kSte, QuantMode::kHybrid, QuantMode::kHard}) {
    EXPECT_EQ(parse_quant_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_quant_mode("stochastic"), ArgumentError);
}

}  // namespace
}  // namespace lhfc
