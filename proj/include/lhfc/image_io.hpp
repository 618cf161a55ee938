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

#include <cstdint>
#include <string>
#include <vector>

#include "lhfc/tensor.hpp"

namespace lhfc {

// 8-bit RGB image in interleaved row-major order.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

// Binary PPM (P6, maxval 255). Errors are FormatError.
Image8 decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_ppm(const Image8& image);
Image8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image8& image);

// (1, 3, h, w) tensor with values byte / 255.
Tensor to_tensor(const Image8& image);
// Clamps to [0, 1] and rounds to the nearest 8-bit level.
Image8 to_image(const Tensor& x);
// to_tensor(to_image(x)): the 8-bit version of a reconstruction.
Tensor round_to_8bit(const Tensor& x);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lhfc
