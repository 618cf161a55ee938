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

#include "lhfc/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lhfc/error.hpp"

namespace lhfc {

double mse(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("mse: " + a.shape().str() + " vs " + b.shape().str());
  }
  if (a.size() == 0) throw ArgumentError("mse: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

namespace {

constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363,
                                              0.1333};
constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

using Plane = std::vector<double>;

struct Image2D {
  int h = 0;
  int w = 0;
  Plane v;
};

std::vector<double> gaussian_window(int size) {
  std::vector<double> g(size);
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2.0 * kWindowSigma * kWindowSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" filtering.
Image2D filter(const Image2D& in, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = in.w - k + 1;
  const int oh = in.h - k + 1;
  Plane tmp(static_cast<std::size_t>(in.h) * ow, 0.0);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * in.v[y * in.w + x + i];
      tmp[y * ow + x] = acc;
    }
  Image2D out{oh, ow, Plane(static_cast<std::size_t>(oh) * ow, 0.0)};
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * tmp[(y + i) * ow + x];
      out.v[y * ow + x] = acc;
    }
  return out;
}

Image2D product(const Image2D& a, const Image2D& b) {
  Image2D out{a.h, a.w, Plane(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

Image2D downsample(const Image2D& in) {
  Image2D out{in.h / 2, in.w / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      const int y0 = 2 * y, x0 = 2 * x;
      out.v[y * out.w + x] =
          0.25 * (in.v[y0 * in.w + x0] + in.v[y0 * in.w + x0 + 1] +
                  in.v[(y0 + 1) * in.w + x0] + in.v[(y0 + 1) * in.w + x0 + 1]);
    }
  return out;
}

struct SsimTerms {
  double ssim = 0.0;
  double cs = 0.0;
};

SsimTerms ssim_terms(const Image2D& a, const Image2D& b, double c1, double c2) {
  const auto g = gaussian_window(std::min({kWindow, a.h, a.w}));
  const Image2D mu_a = filter(a, g);
  const Image2D mu_b = filter(b, g);
  const Image2D aa = filter(product(a, a), g);
  const Image2D bb = filter(product(b, b), g);
  const Image2D ab = filter(product(a, b), g);
  double ssim = 0.0, cs = 0.0;
  for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = aa.v[i] - ma * ma;
    const double vb = bb.v[i] - mb * mb;
    const double cov = ab.v[i] - ma * mb;
    const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double c = (2.0 * cov + c2) / (va + vb + c2);
    ssim += l * c;
    cs += c;
  }
  const double n = static_cast<double>(mu_a.v.size());
  return {ssim / n, cs / n};
}

}  // namespace

int ms_ssim_scales(int min_side) {
  int s = 1;
  while (s < 5 && min_side >= 10 * (1 << s)) ++s;
  return s;
}

double ms_ssim(const Tensor& a, const Tensor& b, double data_range) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("ms_ssim: " + a.shape().str() + " vs " + b.shape().str());
  }
  const Shape s = a.shape();
  if (s.n != 1) throw ShapeError("ms_ssim: expects a single image");
  const int scales = ms_ssim_scales(std::min(s.h, s.w));
  double wsum = 0.0;
  for (int j = 0; j < scales; ++j) wsum += kScaleWeights[j];
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);

  double total = 0.0;
  for (int c = 0; c < s.c; ++c) {
    Image2D pa{s.h, s.w, Plane(s.plane())};
    Image2D pb{s.h, s.w, Plane(s.plane())};
    for (std::size_t i = 0; i < s.plane(); ++i) {
      pa.v[i] = a[a.offset(0, c, 0, 0) + i];
      pb.v[i] = b[b.offset(0, c, 0, 0) + i];
    }
    double score = 1.0;
    for (int j = 0; j < scales; ++j) {
      const SsimTerms t = ssim_terms(pa, pb, c1, c2);
      const double w = kScaleWeights[j] / wsum;
      const double term = j + 1 < scales ? t.cs : t.ssim;
      score *= std::pow(std::max(term, 0.0), w);
      if (j + 1 < scales) {
        pa = downsample(pa);
        pb = downsample(pb);
      }
    }
    total += score;
  }
  return total / s.c;
}

namespace {

struct Poly {
  Eigen::Vector4d coef;  // c0 + c1 x + c2 x^2 + c3 x^3

  double integral(double lo, double hi) const {
    auto prim = [&](double x) {
      return coef[0] * x + coef[1] * x * x / 2.0 + coef[2] * x * x * x / 3.0 +
             coef[3] * x * x * x * x / 4.0;
    };
    return prim(hi) - prim(lo);
  }
};

Poly cubic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd v(n, 4);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j < 4; ++j) {
      v(i, j) = p;
      p *= x[i];
    }
    rhs[i] = y[i];
  }
  return {v.colPivHouseholderQr().solve(rhs)};
}

void check_curve(const RDCurve& c) {
  if (c.points.size() < 4) {
    throw ArgumentError("bd_metrics: curve '" + c.label +
                        "' needs at least 4 points");
  }
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const RDPoint& p = c.points[i];
    if (!(p.bpp > 0.0) || !std::isfinite(p.psnr_db) || !std::isfinite(p.ms_ssim)) {
      throw ArgumentError("bd_metrics: curve '" + c.label +
                          "' has a non-positive rate or non-finite quality");
    }
    if (i > 0 && !(p.bpp > c.points[i - 1].bpp)) {
      throw ArgumentError("bd_metrics: curve '" + c.label +
                          "' rates must increase strictly");
    }
  }
}

double quality_of(const RDPoint& p, Quality q) {
  return q == Quality::kPsnr ? p.psnr_db : p.ms_ssim;
}

}  // namespace

BDResult bd_metrics(const RDCurve& a, const RDCurve& b, Quality quality) {
  check_curve(a);
  check_curve(b);
  std::vector<double> ra, qa, rb, qb;
  for (const auto& p : a.points) {
    ra.push_back(std::log10(p.bpp));
    qa.push_back(quality_of(p, quality));
  }
  for (const auto& p : b.points) {
    rb.push_back(std::log10(p.bpp));
    qb.push_back(quality_of(p, quality));
  }

  BDResult out;
  const double r_lo = std::max(ra.front(), rb.front());
  const double r_hi = std::min(ra.back(), rb.back());
  if (!(r_hi > r_lo)) {
    throw ArgumentError("bd_metrics: the curves' rate ranges do not overlap");
  }
  const Poly fa = cubic_fit(ra, qa);
  const Poly fb = cubic_fit(rb, qb);
  out.bd_quality = (fb.integral(r_lo, r_hi) - fa.integral(r_lo, r_hi)) / (r_hi - r_lo);

  const auto [qa_lo, qa_hi] = std::minmax_element(qa.begin(), qa.end());
  const auto [qb_lo, qb_hi] = std::minmax_element(qb.begin(), qb.end());
  const double q_lo = std::max(*qa_lo, *qb_lo);
  const double q_hi = std::min(*qa_hi, *qb_hi);
  if (!(q_hi > q_lo)) {
    throw ArgumentError("bd_metrics: the curves' quality ranges do not overlap");
  }
  const Poly ga = cubic_fit(qa, ra);
  const Poly gb = cubic_fit(qb, rb);
  const double diff =
      (gb.integral(q_lo, q_hi) - ga.integral(q_lo, q_hi)) / (q_hi - q_lo);
  out.bd_rate_percent = (std::pow(10.0, diff) - 1.0) * 100.0;
  return out;
}

std::string rd_csv(const std::vector<RDCurve>& curves) {
  std::ostringstream os;
  os << "label,bpp,psnr_db,ms_ssim\n";
  char buf[128];
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      std::snprintf(buf, sizeof buf, "%.6f,%.4f,%.6f", p.bpp, p.psnr_db,
                    p.ms_ssim);
      os << c.label << "," << buf << "\n";
    }
  return os.str();
}

}  // namespace lhfc
