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
#include <map>
#include <string>
#include <vector>

#include "lhfc/autograd.hpp"
#include "lhfc/hft.hpp"

namespace lhfc {

// Lower bound of the scale of the conditional Gaussian.
inline constexpr double kSigmaMin = 0.11;
// Probability floor of coding tables and hard-mode rate estimates.
inline constexpr double kPmfFloor = 0x1.0p-15;
// Likelihood floor of the differentiable training rate.
inline constexpr double kTrainingFloor = 1e-9;

// Standard normal cumulative distribution.
double normal_cdf(double x);

// P(v - 0.5 < X < v + 0.5) for X ~ N(0, sigma), evaluated on the lower tail
// for accuracy.
double gaussian_interval(double offset, double sigma);

// ----------------------------------------------------------------------
// Factorized prior over the hyper-latent: one monotone cumulative function
// per channel, built from four affine layers (widths 1-3-3-3-1) with
// x + tanh(f) * tanh(x) nonlinearities between them and a final logistic.

inline constexpr std::array<int, 5> kPriorWidths{1, 3, 3, 3, 1};

struct FactorizedPrior {
  int channels = 0;
  std::array<Tensor, 4> matrices;  // raw, softplus makes them positive
  std::array<Tensor, 4> biases;
  std::array<Tensor, 3> factors;

  static FactorizedPrior from_params(const ModelParams& params, int channels);
  // Logit of the cumulative function of `channel` at x.
  double logit(int channel, double x) const;
  double cdf(int channel, double x) const;
  // C(v + 0.5) - C(v - 0.5), computed on the numerically stable side.
  double interval(int channel, double v) const;
};

std::map<std::string, Shape> prior_param_shapes(int channels);
// Parameters for which every channel's cumulative is logistic(x / scale).
void set_logistic_prior(double scale, int channels, ModelParams& params);

struct RateResult {
  double bits = 0.0;
  // Per-element probabilities (floored), same layout as the input.
  Tensor probabilities;
};

// Hard-mode rate of an integer-valued hyper-latent.
RateResult factorized_rate(const Tensor& z_hat, const FactorizedPrior& prior);
// Hard-mode rate of y_hat under N(mu, sigma) with the pmf floor.
RateResult gaussian_rate(const Tensor& y_hat, const Tensor& mu,
                         const Tensor& sigma);

// Differentiable per-element bits, -log2(max(p, kTrainingFloor)).
Var factorized_bits(Var z, const ParamVars& params);
Var gaussian_bits(Var v, Var mu, Var sigma);

// Coding pmf over symbols [lo, hi]: floored at kPmfFloor, renormalized.
std::vector<double> factorized_pmf(const FactorizedPrior& prior, int channel,
                                   int lo, int hi);
std::vector<double> gaussian_pmf(double sigma, int lo, int hi);

// ----------------------------------------------------------------------
// Context schedule: channel groups split into checkerboard anchor /
// non-anchor parities. Slices are decoded in order; a slice may only
// condition on strictly earlier slices and the hyper features.

enum class Parity { kAnchor, kNonAnchor };

struct Slice {
  int group = 0;
  Parity parity = Parity::kAnchor;
  int channel_begin = 0;
  int channel_end = 0;
};

class ContextSchedule {
 public:
  explicit ContextSchedule(std::vector<int> group_sizes);

  const std::vector<Slice>& slices() const { return slices_; }
  int num_groups() const { return static_cast<int>(sizes_.size()); }
  int group_size(int g) const { return sizes_[g]; }
  int group_offset(int g) const { return offsets_[g]; }
  int channels() const { return offsets_.back(); }

  static bool is_anchor(int h, int w) { return (h + w) % 2 == 0; }
  // Index of the slice that owns element (c, h, w).
  int slice_of(int c, int h, int w) const;
  // 1 where the element at (h, w) has the given parity.
  static Tensor parity_mask(const Shape& shape, Parity parity);

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<Slice> slices_;
};

struct CondGaussianParams {
  Var mu;     // (n, group size, h, w), valid at the slice's positions
  Var sigma;  // >= kSigmaMin
};

std::map<std::string, Shape> context_param_shapes(const HFTConfig& config);

// Mean/scale of one slice. `known` holds decoded latent values in its first
// channels (at least up to the slice's group); values that are causally
// later than the slice are masked out internally, so their contents never
// matter.
CondGaussianParams slice_params(Var known, Var hyper_features,
                                const Slice& slice,
                                const ContextSchedule& schedule,
                                const ParamVars& params,
                                const HFTConfig& config);

// Slice-by-slice driver shared by encoder and decoder. Both sides feed it the
// same decoded values, so both compute bit-identical parameters.
class ContextDecoder {
 public:
  ContextDecoder(const HFTConfig& config, const ModelParams& params,
                 Tensor hyper_features);

  const ContextSchedule& schedule() const { return schedule_; }
  int next_slice() const { return next_; }
  bool done() const {
    return next_ == static_cast<int>(schedule_.slices().size());
  }

  struct SliceTables {
    Tensor mu;     // (n, group size, h, w)
    Tensor sigma;  // (n, group size, h, w)
  };
  // Parameters of `slice`; throws CausalityError unless slice == next_slice().
  SliceTables params_for(int slice) const;
  // Stores the decoded values of the current slice (same layout as
  // SliceTables; only the slice's positions are read) and advances.
  void commit(const Tensor& group_values);

  const Tensor& known() const { return known_; }

 private:
  const HFTConfig& config_;
  const ModelParams& params_;
  ContextSchedule schedule_;
  Tensor hyper_;
  Tensor known_;
  int next_ = 0;
};

}  // namespace lhfc
