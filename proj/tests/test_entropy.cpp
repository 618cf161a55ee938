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
#include <numeric>
#include <random>

#include "lhfc/entropy.hpp"
#include "lhfc/error.hpp"
#include "test_util.hpp"

namespace lhfc {
namespace {

using testing::central_difference;
using testing::random_tensor;
using testing::relative_error;

ModelParams random_prior(int channels, std::uint64_t seed) {
  ModelParams p;
  std::uint64_t s = seed;
  for (const auto& [name, shape] : prior_param_shapes(channels)) {
    p.tensors[name] = random_tensor(shape, ++s, -1.0, 1.0);
  }
  return p;
}

HFTConfig context_config() {
  HFTConfig c = tiny_config();
  c.latent_channels = 6;
  c.groups = {1, 2, 3};
  c.context_hidden = 7;
  c.context_kernel = 3;
  return c;
}

ModelParams random_context(const HFTConfig& c, std::uint64_t seed) {
  ModelParams p;
  init_params(context_param_shapes(c), seed, p);
  // Random biases too, so that no path is accidentally silent.
  std::uint64_t s = seed * 1000;
  for (auto& [name, t] : p.tensors) {
    if (name.ends_with(".b")) t = random_tensor(t.shape(), ++s, -0.5, 0.5);
  }
  return p;
}

TEST(FactorizedPrior, LogisticUnitScale) {
  ModelParams p;
  set_logistic_prior(1.0, 3, p);
  const FactorizedPrior prior = FactorizedPrior::from_params(p, 3);
  const double expected_p = 2.0 / (1.0 + std::exp(-0.5)) - 1.0;
  EXPECT_NEAR(expected_p, 0.2449, 1e-4);
  EXPECT_NEAR(prior.interval(1, 0.0), expected_p, 1e-12);
  const RateResult r = factorized_rate(Tensor(Shape{1, 3, 2, 2}, 0.0), prior);
  EXPECT_NEAR(r.bits / 12.0, 2.0297, 1e-4);
  EXPECT_NEAR(r.probabilities[5], expected_p, 1e-12);
  // Logistic cdf at +-2.
  EXPECT_NEAR(prior.cdf(0, 2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
}

TEST(FactorizedPrior, ConcentratedPriorCostsAlmostNothing) {
  ModelParams p;
  set_logistic_prior(1e-3, 2, p);
  const FactorizedPrior prior = FactorizedPrior::from_params(p, 2);
  const RateResult r = factorized_rate(Tensor(Shape{1, 2, 3, 3}, 0.0), prior);
  EXPECT_GE(r.bits, 0.0);
  EXPECT_LT(r.bits, 1e-6);
  // A far value hits the coding floor, which bounds its cost at 15 bits.
  Tensor far(Shape{1, 2, 1, 1}, 0.0);
  far[0] = 40.0;
  EXPECT_NEAR(factorized_rate(far, prior).bits, 15.0, 1e-6);
}

TEST(FactorizedPrior, MonotoneWithLimitsForRandomParameters) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const FactorizedPrior prior = FactorizedPrior::from_params(random_prior(2, seed * 17), 2);
    for (int c = 0; c < 2; ++c) {
      double prev = prior.cdf(c, -60.0);
      EXPECT_LT(prev, 1e-3);
      for (double x = -60.0; x <= 60.0; x += 0.25) {
        const double v = prior.cdf(c, x);
        EXPECT_GE(v, prev);
        prev = v;
      }
      EXPECT_GT(prev, 1.0 - 1e-3);
    }
  }
}

TEST(FactorizedPrior, RateIsAdditive) {
  const FactorizedPrior prior = FactorizedPrior::from_params(random_prior(3, 5), 3);
  Tensor z(Shape{2, 3, 3, 4});
  std::mt19937_64 rng(3);
  for (double& v : z.data()) v = static_cast<double>(static_cast<int>(rng() % 9) - 4);
  const RateResult r = factorized_rate(z, prior);
  double sum = 0.0;
  for (double p : r.probabilities.data()) sum += -std::log2(p);
  EXPECT_NEAR(r.bits, sum, 1e-9);
  Tensor first(Shape{1, 3, 3, 4});
  Tensor second(Shape{1, 3, 3, 4});
  std::copy(z.data().begin(), z.data().begin() + 36, first.data().begin());
  std::copy(z.data().begin() + 36, z.data().end(), second.data().begin());
  EXPECT_NEAR(r.bits, factorized_rate(first, prior).bits + factorized_rate(second, prior).bits, 1e-9);
}

TEST(FactorizedPrior, RejectsNonIntegerAndWrongChannels) {
  ModelParams p;
  set_logistic_prior(1.0, 2, p);
  const FactorizedPrior prior = FactorizedPrior::from_params(p, 2);
  Tensor z(Shape{1, 2, 1, 1}, 0.0);
  z[1] = 0.5;
  EXPECT_THROW(factorized_rate(z, prior), ArgumentError);
  EXPECT_THROW(factorized_rate(Tensor(Shape{1, 3, 1, 1}), prior), ShapeError);
  EXPECT_THROW(FactorizedPrior::from_params(p, 3), ShapeError);
}

TEST(FactorizedPrior, DifferentiableBitsMatchRateAndFiniteDifferences) {
  ModelParams p = random_prior(2, 40);
  Tensor z(Shape{1, 2, 2, 3});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(static_cast<int>(i % 5) - 2);
  const RateResult coded = factorized_rate(z, FactorizedPrior::from_params(p, 2));

  auto eval = [&](bool backward, std::map<std::string, Tensor>* grads) {
    Tape tape;
    const ParamVars vars = bind_params(tape, p, backward);
    Var zv = tape.leaf(z, backward);
    Var loss = sum(factorized_bits(zv, vars));
    if (backward) {
      const Gradients g = tape.backward(loss);
      for (const auto& [name, v] : vars) (*grads)[name] = g.of(v);
      (*grads)["z"] = g.of(zv);
    }
    return loss.value()[0];
  };
  {
    // Away from the coding floor the per-element costs agree exactly.
    Tape tape;
    const Tensor bits = factorized_bits(tape.constant(z), bind_params(tape, p, false)).value();
    int compared = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (coded.probabilities[i] < 0x1.0p-14) continue;
      EXPECT_NEAR(bits[i], -std::log2(coded.probabilities[i]), 1e-9);
      ++compared;
    }
    EXPECT_GT(compared, 0);
  }
  std::map<std::string, Tensor> grads;
  eval(true, &grads);
  for (auto& [name, t] : p.tensors) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double numeric = central_difference([&] { return eval(false, nullptr); }, t[i], 1e-5);
      EXPECT_LT(relative_error(grads[name][i], numeric), 1e-5) << name << "[" << i << "]";
    }
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double numeric = central_difference([&] { return eval(false, nullptr); }, z[i], 1e-5);
    EXPECT_LT(relative_error(grads["z"][i], numeric), 1e-5) << "z[" << i << "]";
  }
}

TEST(GaussianRate, UnitScaleAtTheMean) {
  const Shape s{1, 1, 1, 1};
  const RateResult r = gaussian_rate(Tensor(s, 0.7), Tensor(s, 0.7), Tensor(s, 1.0));
  EXPECT_NEAR(r.probabilities[0], 0.38292, 1e-5);
  // The rounded figure 1.3851 is within 3e-4 of the exact -log2(0.382925) = 1.38487.
  EXPECT_NEAR(r.bits, 1.3851, 5e-4);
  EXPECT_NEAR(r.bits, -std::log2(std::erf(0.5 / std::sqrt(2.0))), 1e-12);
  // Independent oracle through erf.
  const double p = std::erf(0.5 / std::sqrt(2.0));
  EXPECT_NEAR(r.probabilities[0], p, 1e-14);
}

TEST(GaussianRate, MinimumScaleAtTheMeanIsNearlyFree) {
  const Shape s{1, 1, 1, 1};
  const RateResult r = gaussian_rate(Tensor(s, 3.0), Tensor(s, 3.0), Tensor(s, kSigmaMin));
  EXPECT_LT(r.bits, 1e-4);
}

TEST(GaussianRate, MonotoneInDistanceFromMean) {
  for (double sigma : {0.11, 0.3, 1.0, 4.0, 20.0}) {
    double prev = -1.0;
    for (int d = 0; d <= 40; ++d) {
      const Shape s{1, 1, 1, 1};
      const double bits = gaussian_rate(Tensor(s, 0.25 + d), Tensor(s, 0.25), Tensor(s, sigma)).bits;
      const double neg = gaussian_rate(Tensor(s, 0.25 - d), Tensor(s, 0.25), Tensor(s, sigma)).bits;
      EXPECT_DOUBLE_EQ(bits, neg);
      if (d > 0) EXPECT_GE(bits, prev) << "sigma " << sigma << " d " << d;
      prev = bits;
    }
  }
}

TEST(GaussianRate, ScaleBelowMinimumIsAnInternalError) {
  const Shape s{1, 1, 1, 1};
  EXPECT_THROW(gaussian_rate(Tensor(s, 0.0), Tensor(s, 0.0), Tensor(s, 0.05)), Error);
}

TEST(GaussianRate, DifferentiableBitsMatchAndFiniteDifferences) {
  const Shape s{1, 2, 3, 3};
  Tensor v = random_tensor(s, 1, -3.0, 3.0);
  Tensor mu = random_tensor(s, 2, -1.0, 1.0);
  Tensor sig = random_tensor(s, 3, 0.2, 2.0);
  auto eval = [&](Tape& tape, Var& a, Var& b, Var& c, bool g) {
    a = tape.leaf(v, g);
    b = tape.leaf(mu, g);
    c = tape.leaf(sig, g);
    return sum(gaussian_bits(a, b, c));
  };
  Tape tape;
  Var a, b, c;
  Var loss = eval(tape, a, b, c, true);
  const RateResult coded = gaussian_rate(v, mu, sig);
  int compared = 0;
  {
    Tape t;
    const Tensor bits = gaussian_bits(t.constant(v), t.constant(mu), t.constant(sig)).value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (coded.probabilities[i] < 0x1.0p-14) continue;
      EXPECT_NEAR(bits[i], -std::log2(coded.probabilities[i]), 1e-9);
      ++compared;
    }
  }
  EXPECT_GT(compared, 0);
  const Gradients g = tape.backward(loss);
  auto f = [&] {
    Tape t;
    Var x, y, z;
    return eval(t, x, y, z, false).value()[0];
  };
  for (auto [t, var] : {std::pair<Tensor*, Var>{&v, a}, {&mu, b}, {&sig, c}}) {
    const Tensor grad = g.of(var);
    for (std::size_t i = 0; i < t->size(); ++i) {
      EXPECT_LT(relative_error(grad[i], central_difference(f, (*t)[i], 1e-5)), 1e-5);
    }
  }
}

TEST(Pmf, TablesArePositiveAndNormalized) {
  const FactorizedPrior prior = FactorizedPrior::from_params(random_prior(2, 77), 2);
  auto check = [](const std::vector<double>& p) {
    double total = 0.0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 0x1.0p-12);
  };
  for (double sigma : {0.11, 0.5, 3.0, 50.0, 5000.0}) {
    check(gaussian_pmf(sigma, -64, 63));
    check(gaussian_pmf(sigma, -3, 3));
  }
  check(factorized_pmf(prior, 0, -64, 63));
  check(factorized_pmf(prior, 1, -200, 7));
}

TEST(ContextSchedule, ReferenceGroupsGiveEightSlices) {
  const ContextSchedule s({16, 16, 32, 256});
  ASSERT_EQ(s.slices().size(), 8u);
  EXPECT_EQ(s.channels(), 320);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(s.slices()[i].group, i / 2);
    EXPECT_EQ(s.slices()[i].parity, i % 2 == 0 ? Parity::kAnchor : Parity::kNonAnchor);
  }
  EXPECT_EQ(s.slices()[5].channel_begin, 32);
  EXPECT_EQ(s.slices()[5].channel_end, 64);
}

TEST(ContextSchedule, EveryElementInExactlyOneSlice) {
  const ContextSchedule s({3, 1, 4});
  std::vector<int> count(8 * 5 * 6, 0);
  for (int i = 0; i < static_cast<int>(s.slices().size()); ++i) {
    const Slice& sl = s.slices()[i];
    for (int c = sl.channel_begin; c < sl.channel_end; ++c)
      for (int h = 0; h < 5; ++h)
        for (int w = 0; w < 6; ++w)
          if (ContextSchedule::is_anchor(h, w) == (sl.parity == Parity::kAnchor)) {
            ++count[(c * 5 + h) * 6 + w];
            EXPECT_EQ(s.slice_of(c, h, w), i);
          }
  }
  for (int v : count) EXPECT_EQ(v, 1);
  EXPECT_THROW(ContextSchedule({}), ArgumentError);
  EXPECT_THROW(ContextSchedule({2, 0}), ArgumentError);
}

// Computes (mu, sigma) of `slice` from a full latent tensor.
std::pair<Tensor, Tensor> slice_tables(const HFTConfig& c, const ModelParams& p,
                                       const Tensor& known, const Tensor& hyper, int slice) {
  Tape tape;
  const ParamVars vars = bind_params(tape, p, false);
  const ContextSchedule s(c.groups);
  const CondGaussianParams r = slice_params(tape.constant(known), tape.constant(hyper),
                                            s.slices()[slice], s, vars, c);
  return {r.mu.value(), r.sigma.value()};
}

TEST(ContextModel, SlicesIgnoreEverythingNotYetDecoded) {
  const HFTConfig c = context_config();
  const ContextSchedule s(c.groups);
  std::mt19937_64 rng(21);
  for (int draw = 0; draw < 5; ++draw) {
    const ModelParams p = random_context(c, 100 + draw);
    const Tensor hyper = random_tensor(Shape{1, 12, 5, 6}, 200 + draw);
    const Tensor known = random_tensor(Shape{1, 6, 5, 6}, 300 + draw, -3.0, 3.0);
    for (int i = 0; i < static_cast<int>(s.slices().size()); ++i) {
      Tensor perturbed = known;
      for (int ch = 0; ch < 6; ++ch)
        for (int h = 0; h < 5; ++h)
          for (int w = 0; w < 6; ++w)
            if (s.slice_of(ch, h, w) >= i) perturbed.at(0, ch, h, w) += 5.0 * (testing::uniform01(rng) - 0.5);
      const auto base = slice_tables(c, p, known, hyper, i);
      const auto moved = slice_tables(c, p, perturbed, hyper, i);
      EXPECT_EQ(testing::values(base.first), testing::values(moved.first)) << "slice " << i;
      EXPECT_EQ(testing::values(base.second), testing::values(moved.second)) << "slice " << i;
    }
  }
}

TEST(ContextModel, AnchorsDriveNonAnchorParameters) {
  const HFTConfig c = context_config();
  const ModelParams p = random_context(c, 5);
  const Tensor hyper = random_tensor(Shape{1, 12, 5, 6}, 6);
  const Tensor known = random_tensor(Shape{1, 6, 5, 6}, 7);
  for (int g = 0; g < 3; ++g) {
    const int channel = ContextSchedule(c.groups).group_offset(g);
    Tensor perturbed = known;
    perturbed.at(0, channel, 2, 2) += 1.0;  // an anchor
    const auto base = slice_tables(c, p, known, hyper, 2 * g + 1);
    const auto moved = slice_tables(c, p, perturbed, hyper, 2 * g + 1);
    // Non-anchor neighbour of the perturbed anchor.
    EXPECT_NE(base.first.at(0, 0, 2, 3), moved.first.at(0, 0, 2, 3)) << "group " << g;
    // Earlier groups feed later anchors too.
    if (g + 1 < 3) {
      const auto later = slice_tables(c, p, known, hyper, 2 * g + 2);
      const auto later_moved = slice_tables(c, p, perturbed, hyper, 2 * g + 2);
      EXPECT_NE(testing::values(later.first), testing::values(later_moved.first));
    }
  }
  // And the hyper features feed the very first slice.
  Tensor hyper2 = hyper;
  hyper2.at(0, 3, 1, 1) += 1.0;
  EXPECT_NE(testing::values(slice_tables(c, p, known, hyper, 0).first),
            testing::values(slice_tables(c, p, known, hyper2, 0).first));
}

TEST(ContextModel, ScaleNeverBelowMinimum) {
  const HFTConfig c = context_config();
  ModelParams p = random_context(c, 8);
  for (int g = 0; g < 3; ++g) {
    Tensor& b = p.tensors["ctx.g" + std::to_string(g) + ".f1.b"];
    for (double& v : b.data()) v = -1e4;
  }
  const Tensor hyper = random_tensor(Shape{1, 12, 4, 4}, 9);
  const Tensor known = random_tensor(Shape{1, 6, 4, 4}, 10);
  for (int i = 0; i < 6; ++i) {
    for (double v : testing::values(slice_tables(c, p, known, hyper, i).second)) {
      EXPECT_GE(v, kSigmaMin);
    }
  }
}

TEST(ContextDecoder, MatchesSliceParamsAndEnforcesOrder) {
  const HFTConfig c = context_config();
  const ModelParams p = random_context(c, 11);
  const Tensor hyper = random_tensor(Shape{1, 12, 4, 5}, 12);
  const Tensor truth = random_tensor(Shape{1, 6, 4, 5}, 13);
  ContextDecoder dec(c, p, hyper);
  EXPECT_THROW(dec.params_for(1), CausalityError);
  const ContextSchedule& s = dec.schedule();
  for (int i = 0; i < 6; ++i) {
    const auto tables = dec.params_for(i);
    const auto expected = slice_tables(c, p, truth, hyper, i);
    EXPECT_EQ(testing::values(tables.mu), testing::values(expected.first));
    EXPECT_EQ(testing::values(tables.sigma), testing::values(expected.second));
    const Slice& sl = s.slices()[i];
    Tensor values(Shape{1, sl.channel_end - sl.channel_begin, 4, 5});
    for (int ch = 0; ch < values.shape().c; ++ch)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) values.at(0, ch, h, w) = truth.at(0, sl.channel_begin + ch, h, w);
    dec.commit(values);
    if (i + 1 < 6) EXPECT_THROW(dec.params_for(i), CausalityError);
  }
  EXPECT_TRUE(dec.done());
  EXPECT_EQ(testing::values(dec.known()), testing::values(truth));
  EXPECT_THROW(dec.commit(Tensor(Shape{1, 3, 4, 5})), CausalityError);
}

}  // namespace
}  // namespace lhfc
