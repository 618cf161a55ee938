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

#include "lhfc/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lhfc/error.hpp"

namespace lhfc {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint64_t kCarry = std::uint64_t{1} << 32;

}  // namespace

QuantizedCdf build_cdf(std::span<const double> pmf, int precision) {
  if (pmf.empty()) throw ArgumentError("build_cdf: empty pmf");
  if (precision < 1 || precision > 16) {
    throw ArgumentError("build_cdf: precision must be in [1, 16]");
  }
  const std::int64_t total = std::int64_t{1} << precision;
  const auto n = static_cast<std::int64_t>(pmf.size());
  if (n > total) {
    throw ArgumentError("build_cdf: " + std::to_string(n) +
                        " symbols exceed 2^precision");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (!(pmf[i] > 0.0) || !std::isfinite(pmf[i])) {
      throw ArgumentError("build_cdf: symbol " + std::to_string(i) +
                          " has non-positive probability");
    }
    mass += pmf[i];
  }

  std::vector<std::int64_t> count(pmf.size());
  std::vector<double> remainder(pmf.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double ideal = pmf[i] / mass * static_cast<double>(total);
    const double base = std::floor(ideal);
    count[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(base));
    remainder[i] = ideal - static_cast<double>(count[i]);
    assigned += count[i];
  }

  std::vector<std::size_t> order(pmf.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t left = total - assigned;
  if (left > 0) {
    // Largest remainders first; ties resolved by symbol index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] > remainder[b];
    });
    for (std::size_t i = 0; left > 0; i = (i + 1) % order.size(), --left) {
      ++count[order[i]];
    }
  } else if (left < 0) {
    // Only reachable through the one-count minimum; take from the
    // smallest remainders that can spare a count.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] < remainder[b];
    });
    while (left < 0) {
      bool progressed = false;
      for (std::size_t idx : order) {
        if (left == 0) break;
        if (count[idx] > 1) {
          --count[idx];
          ++left;
          progressed = true;
        }
      }
      if (!progressed) throw ArgumentError("build_cdf: cannot fit counts");
    }
  }

  QuantizedCdf cdf;
  cdf.precision = precision;
  cdf.counts.resize(pmf.size() + 1);
  cdf.counts[0] = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    cdf.counts[i + 1] = cdf.counts[i] + static_cast<std::uint32_t>(count[i]);
  }
  return cdf;
}

void RangeEncoder::put(std::uint32_t cum, std::uint32_t freq) {
  const std::uint32_t r = range_ >> kCdfPrecision;
  low_ += static_cast<std::uint64_t>(r) * cum;
  range_ = r * freq;
  if (low_ >= kCarry) {
    // The carry ripples into bytes already written; a run of 0xFF turns
    // into zeros. It can never pass the first byte, since low + range never
    // exceeded the initial interval.
    low_ -= kCarry;
    for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
      if (++*it != 0) break;
    }
  }
  while (range_ < kTop) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ = (low_ << 8) & (kCarry - 1);
    range_ <<= 8;
  }
}

void RangeEncoder::encode(int symbol, const QuantizedCdf& cdf) {
  if (finished_) throw ArgumentError("range encoder already finished");
  if (cdf.precision != kCdfPrecision) {
    throw ArgumentError("range coder expects 16-bit cdfs");
  }
  if (symbol < 0 || symbol >= cdf.num_symbols()) {
    throw ArgumentError("symbol " + std::to_string(symbol) +
                        " outside cdf with " + std::to_string(cdf.num_symbols()) +
                        " symbols");
  }
  put(cdf.counts[symbol], cdf.freq(symbol));
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
      low_ <<= 8;
    }
    finished_ = true;
  }
  return out_;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload)
    : payload_(payload) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= payload_.size()) {
    throw DecodeError("range decoder ran past the end of the payload", pos_);
  }
  return payload_[pos_++];
}

int RangeDecoder::decode(const QuantizedCdf& cdf) {
  if (cdf.precision != kCdfPrecision) {
    throw ArgumentError("range coder expects 16-bit cdfs");
  }
  // code_ is the offset of the stream value from the interval's low end.
  const std::uint32_t r = range_ >> kCdfPrecision;
  const std::uint32_t value = code_ / r;
  if (value >= (1u << kCdfPrecision)) {
    throw DecodeError("corrupt payload: code outside the coding interval", pos_);
  }
  // First symbol whose upper bound exceeds value.
  const auto it = std::upper_bound(cdf.counts.begin() + 1, cdf.counts.end(), value);
  const int symbol = static_cast<int>(it - cdf.counts.begin()) - 1;
  if (symbol < 0 || symbol >= cdf.num_symbols()) {
    throw DecodeError("corrupt payload: no symbol for code value", pos_);
  }
  code_ -= r * cdf.counts[symbol];
  range_ = r * cdf.freq(symbol);
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

std::vector<std::uint8_t> encode_symbols(std::span<const int> symbols,
                                         std::span<const QuantizedCdf> cdfs) {
  if (symbols.size() != cdfs.size()) {
    throw ArgumentError("encode: one cdf per symbol required");
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const int s = symbols[i];
    if (s < 0 || s >= cdfs[i].num_symbols()) {
      throw ArgumentError("encode: symbol " + std::to_string(s) +
                          " at position " + std::to_string(i) +
                          " is outside its cdf");
    }
    enc.encode(s, cdfs[i]);
  }
  return enc.finish();
}

std::vector<int> decode_symbols(std::span<const std::uint8_t> payload,
                                std::span<const QuantizedCdf> cdfs) {
  RangeDecoder dec(payload);
  std::vector<int> out;
  out.reserve(cdfs.size());
  for (const QuantizedCdf& cdf : cdfs) out.push_back(dec.decode(cdf));
  if (!dec.exhausted()) {
    throw DecodeError("trailing bytes after the last symbol", dec.position());
  }
  return out;
}

}  // namespace lhfc
