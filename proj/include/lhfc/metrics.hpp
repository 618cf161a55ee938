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

#include <string>
#include <vector>

#include "lhfc/tensor.hpp"

namespace lhfc {

// Identical inputs report this instead of infinity.
inline constexpr double kPsnrCap = 100.0;

double mse(const Tensor& a, const Tensor& b);
// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Tensor& a, const Tensor& b, double peak);

// Multi-scale SSIM of two (1, c, h, w) images with values in [0, data_range].
// Uses up to five scales; smaller images drop the coarsest scales and
// renormalize the remaining weights. Channels are scored independently and
// averaged.
double ms_ssim(const Tensor& a, const Tensor& b, double data_range = 1.0);
// Number of scales ms_ssim uses for an image with this smaller side.
int ms_ssim_scales(int min_side);

struct RDPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
};

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;  // strictly increasing bpp
};

enum class Quality { kPsnr, kMsSsim };

struct BDResult {
  double bd_rate_percent = 0.0;  // rate change of B relative to A
  double bd_quality = 0.0;       // quality change of B relative to A
};

// Bjontegaard deltas from cubic fits of quality against log10 rate (and the
// inverse), averaged over the intersection of the two curves' ranges.
BDResult bd_metrics(const RDCurve& a, const RDCurve& b,
                    Quality quality = Quality::kPsnr);

// CSV with columns label, bpp, psnr_db, ms_ssim.
std::string rd_csv(const std::vector<RDCurve>& curves);

}  // namespace lhfc
