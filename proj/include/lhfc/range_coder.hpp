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
#include <vector>

namespace lhfc {

inline constexpr int kCdfPrecision = 16;

// Cumulative counts c_0 = 0 <= ... <= c_n = 2^precision over n symbols.
struct QuantizedCdf {
  int precision = kCdfPrecision;
  std::vector<std::uint32_t> counts;

  int num_symbols() const { return static_cast<int>(counts.size()) - 1; }
  std::uint32_t freq(int s) const { return counts[s + 1] - counts[s]; }
};

// Largest-remainder quantization of a pmf. Every symbol receives at least
// one count and the total is exactly 2^precision.
QuantizedCdf build_cdf(std::span<const double> pmf, int precision = kCdfPrecision);

// Byte-oriented range encoder (32-bit range, 16-bit probabilities). Bytes
// are emitted most significant first and carries are propagated into the
// bytes already written; finish() flushes the four bytes of `low`.
class RangeEncoder {
 public:
  void encode(int symbol, const QuantizedCdf& cdf);
  std::vector<std::uint8_t> finish();

  std::size_t bytes_so_far() const { return out_.size(); }

 private:
  void put(std::uint32_t cum, std::uint32_t freq);

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> payload);

  int decode(const QuantizedCdf& cdf);
  // Bytes consumed so far.
  std::size_t position() const { return pos_; }
  // True when every payload byte has been consumed.
  bool exhausted() const { return pos_ == payload_.size(); }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> payload_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// Convenience wrappers: one cdf per symbol.
std::vector<std::uint8_t> encode_symbols(std::span<const int> symbols,
                                         std::span<const QuantizedCdf> cdfs);
std::vector<int> decode_symbols(std::span<const std::uint8_t> payload,
                                std::span<const QuantizedCdf> cdfs);

}  // namespace lhfc
