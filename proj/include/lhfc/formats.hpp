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
#include <span>
#include <string>
#include <vector>

#include "lhfc/model.hpp"

namespace lhfc {

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::uint8_t kCheckpointVersion = 1;
// lambda_index stored when the model's grid position is unknown.
inline constexpr std::uint8_t kNoLambdaIndex = 0xFF;

// Inclusive symbol range of one latent channel.
struct SymbolWindow {
  std::int32_t lo = 0;
  std::int32_t hi = 0;
  bool operator==(const SymbolWindow&) const = default;
};

// Compressed image. All integers are little-endian.
//   "LHFC" | version u8 | width u32 | height u32 | model_id u16 |
//   lambda_index u8 | z windows: count u16, (lo i32, hi i32)* |
//   y windows: count u16, (lo i32, hi i32)* |
//   z payload: length u32, bytes | y payload: length u32, bytes
struct Bitstream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t model_id = 0;
  std::uint8_t lambda_index = kNoLambdaIndex;
  std::vector<SymbolWindow> z_windows;
  std::vector<SymbolWindow> y_windows;
  std::vector<std::uint8_t> z_payload;
  std::vector<std::uint8_t> y_payload;

  bool operator==(const Bitstream&) const = default;
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs);
// Throws DecodeError (with byte offset) on truncation or bad magic/version.
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

// Model file. "LHFW" | version u8 | JSON length u32, architecture JSON |
// tensor count u32 | per tensor: name length u16, name, rank u8,
// dims u32 * rank, float32 data.
std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace lhfc
