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

#include "lhfc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lhfc/error.hpp"

namespace lhfc {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
    throw ShapeError("tensor extents must be positive, got " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
    throw ShapeError("tensor extents must be positive, got " + shape.str());
  }
  if (data_.size() != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double dot(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("dot: shape " + a.shape().str() + " vs " +
                     b.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& a) {
  return std::accumulate(a.data().begin(), a.data().end(), 0.0);
}

namespace kernels {
namespace {

// Range of output columns `o` for which o*stride - pad + tap lands inside
// [0, in). Returns an empty range (lo > hi) when none do.
void valid_range(int out, int in, int stride, int pad, int tap, int& lo,
                 int& hi) {
  // o*stride >= pad - tap
  const int need = pad - tap;
  lo = need <= 0 ? 0 : (need + stride - 1) / stride;
  // o*stride <= in - 1 + pad - tap
  const int top = in - 1 + pad - tap;
  hi = top < 0 ? -1 : std::min(out - 1, top / stride);
}

}  // namespace

int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

int conv_transpose_out_size(int in, int k, int stride, int pad, int out_pad) {
  return (in - 1) * stride - 2 * pad + k + out_pad;
}

void check_conv_args(const Shape& input, const Shape& weight, int stride,
                     int pad) {
  if (stride <= 0) {
    throw ArgumentError("convolution stride must be positive, got " +
                        std::to_string(stride));
  }
  if (pad < 0) {
    throw ArgumentError("convolution padding must be non-negative");
  }
  if (weight.h != weight.w || weight.h % 2 == 0) {
    throw ShapeError("convolution kernel must be square and odd, weight " +
                     weight.str());
  }
  if (input.c != weight.c) {
    throw ShapeError("conv2d: input " + input.str() +
                     " has channel count incompatible with weight " +
                     weight.str());
  }
  if (input.h + 2 * pad < weight.h || input.w + 2 * pad < weight.w) {
    throw ShapeError("conv2d: kernel " + weight.str() +
                     " larger than padded input " + input.str());
  }
}

Tensor conv2d(const Tensor& input, const Tensor& weight,
              std::span<const double> bias, ConvGeometry g) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  check_conv_args(is, ws, g.stride, g.pad);
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(ws.n)) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                     " does not match weight " + ws.str());
  }
  const int k = ws.h;
  const int oh_n = conv_out_size(is.h, k, g.stride, g.pad);
  const int ow_n = conv_out_size(is.w, k, g.stride, g.pad);
  Tensor out(Shape{is.n, ws.n, oh_n, ow_n});

  for (int n = 0; n < is.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      double* o = out.ptr() + out.offset(n, co, 0, 0);
      if (!bias.empty()) std::fill(o, o + out.shape().plane(), bias[co]);
      for (int ci = 0; ci < ws.c; ++ci) {
        const double* in = input.ptr() + input.offset(n, ci, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          int oh_lo, oh_hi;
          valid_range(oh_n, is.h, g.stride, g.pad, kh, oh_lo, oh_hi);
          for (int kw = 0; kw < k; ++kw) {
            const double wv = weight.at(co, ci, kh, kw);
            int ow_lo, ow_hi;
            valid_range(ow_n, is.w, g.stride, g.pad, kw, ow_lo, ow_hi);
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const double* irow = in + (oh * g.stride - g.pad + kh) * is.w +
                                   (kw - g.pad);
              double* orow = o + oh * ow_n;
              for (int ow = ow_lo; ow <= ow_hi; ++ow) {
                orow[ow] += wv * irow[ow * g.stride];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                           ConvGeometry g, Tensor& grad_input) {
  const Shape& os = grad_out.shape();
  const Shape& ws = weight.shape();
  const Shape& is = grad_input.shape();
  if (os.c != ws.n || is.c != ws.c || os.n != is.n) {
    throw ShapeError("conv2d backward: grad " + os.str() + " weight " +
                     ws.str() + " input " + is.str());
  }
  const int k = ws.h;
  for (int n = 0; n < os.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      const double* go = grad_out.ptr() + grad_out.offset(n, co, 0, 0);
      for (int ci = 0; ci < ws.c; ++ci) {
        double* gi = grad_input.ptr() + grad_input.offset(n, ci, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          int oh_lo, oh_hi;
          valid_range(os.h, is.h, g.stride, g.pad, kh, oh_lo, oh_hi);
          for (int kw = 0; kw < k; ++kw) {
            const double wv = weight.at(co, ci, kh, kw);
            int ow_lo, ow_hi;
            valid_range(os.w, is.w, g.stride, g.pad, kw, ow_lo, ow_hi);
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              double* irow =
                  gi + (oh * g.stride - g.pad + kh) * is.w + (kw - g.pad);
              const double* orow = go + oh * os.w;
              for (int ow = ow_lo; ow <= ow_hi; ++ow) {
                irow[ow * g.stride] += wv * orow[ow];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                            ConvGeometry g, Tensor& grad_weight) {
  const Shape& is = input.shape();
  const Shape& os = grad_out.shape();
  const Shape& ws = grad_weight.shape();
  if (os.c != ws.n || is.c != ws.c || os.n != is.n) {
    throw ShapeError("conv2d weight grad: input " + is.str() + " grad " +
                     os.str() + " weight " + ws.str());
  }
  const int k = ws.h;
  for (int n = 0; n < is.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      const double* go = grad_out.ptr() + grad_out.offset(n, co, 0, 0);
      for (int ci = 0; ci < ws.c; ++ci) {
        const double* in = input.ptr() + input.offset(n, ci, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          int oh_lo, oh_hi;
          valid_range(os.h, is.h, g.stride, g.pad, kh, oh_lo, oh_hi);
          for (int kw = 0; kw < k; ++kw) {
            int ow_lo, ow_hi;
            valid_range(os.w, is.w, g.stride, g.pad, kw, ow_lo, ow_hi);
            double acc = 0.0;
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const double* irow =
                  in + (oh * g.stride - g.pad + kh) * is.w + (kw - g.pad);
              const double* orow = go + oh * os.w;
              for (int ow = ow_lo; ow <= ow_hi; ++ow) {
                acc += irow[ow * g.stride] * orow[ow];
              }
            }
            grad_weight.at(co, ci, kh, kw) += acc;
          }
        }
      }
    }
  }
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& weight,
                        std::span<const double> bias, ConvGeometry g,
                        int out_pad) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (g.stride <= 0) {
    throw ArgumentError("conv2d_transpose stride must be positive, got " +
                        std::to_string(g.stride));
  }
  if (out_pad < 0 || out_pad >= g.stride) {
    throw ArgumentError("conv2d_transpose requires 0 <= out_pad < stride");
  }
  if (ws.h != ws.w || ws.h % 2 == 0) {
    throw ShapeError("conv2d_transpose kernel must be square and odd, weight " +
                     ws.str());
  }
  if (is.c != ws.n) {
    throw ShapeError("conv2d_transpose: input " + is.str() +
                     " has channel count incompatible with weight " +
                     ws.str());
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(ws.c)) {
    throw ShapeError("conv2d_transpose: bias length " +
                     std::to_string(bias.size()) + " does not match weight " +
                     ws.str());
  }
  const int k = ws.h;
  const int oh = conv_transpose_out_size(is.h, k, g.stride, g.pad, out_pad);
  const int ow = conv_transpose_out_size(is.w, k, g.stride, g.pad, out_pad);
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d_transpose: empty output for input " + is.str());
  }
  Tensor out(Shape{is.n, ws.c, oh, ow});
  if (!bias.empty()) {
    for (int n = 0; n < is.n; ++n)
      for (int c = 0; c < ws.c; ++c) {
        double* o = out.ptr() + out.offset(n, c, 0, 0);
        std::fill(o, o + out.shape().plane(), bias[c]);
      }
  }
  conv2d_backward_input(input, weight, g, out);
  return out;
}

}  // namespace kernels
}  // namespace lhfc
