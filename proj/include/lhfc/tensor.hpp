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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lhfc {

// Extent of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense row-major (n, c, h, w) array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }
  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const {
    return data_[offset(n, c, h, w)];
  }

  void fill(double v);
  bool all_finite() const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);

// Dense convolution kernels. Weight layouts follow the usual convention:
// conv weights are (c_out, c_in, k, k), transposed-conv weights are
// (c_in, c_out, k, k). All convolutions use zero padding.
namespace kernels {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

int conv_out_size(int in, int k, int stride, int pad);
int conv_transpose_out_size(int in, int k, int stride, int pad, int out_pad);

void check_conv_args(const Shape& input, const Shape& weight, int stride,
                     int pad);

// out = conv(input, weight) + bias. `bias` may be empty.
Tensor conv2d(const Tensor& input, const Tensor& weight,
              std::span<const double> bias, ConvGeometry g);

// Accumulates d(loss)/d(input) of conv2d into grad_input (the scatter form;
// also the forward pass of a transposed convolution).
void conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                           ConvGeometry g, Tensor& grad_input);

// Accumulates d(loss)/d(weight) of conv2d into grad_weight.
void conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                            ConvGeometry g, Tensor& grad_weight);

Tensor conv2d_transpose(const Tensor& input, const Tensor& weight,
                        std::span<const double> bias, ConvGeometry g,
                        int out_pad);

}  // namespace kernels
}  // namespace lhfc
