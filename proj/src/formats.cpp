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

#include "lhfc/formats.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "lhfc/error.hpp"
#include "lhfc/image_io.hpp"

namespace lhfc {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, const char* what) : b_(b), what_(what) {}

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return le(4); }
  std::int32_t i32() { return static_cast<std::int32_t>(le(4)); }
  float f32() { return std::bit_cast<float>(le(4)); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DecodeError(std::string(what_) + ": " + msg, pos_);
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated");
  }
  std::uint32_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> b_;
  const char* what_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char* magic, std::uint8_t version) {
  const auto m = r.bytes(4);
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw DecodeError(std::string("not a ") + magic + " file (bad magic)", 0);
  }
  const std::uint8_t v = r.u8();
  if (v != version) {
    throw DecodeError(std::string(magic) + ": unsupported version " +
                          std::to_string(v),
                      4);
  }
}

void write_windows(Writer& w, const std::vector<SymbolWindow>& ws) {
  if (ws.size() > 0xFFFF) throw ArgumentError("too many channels for bitstream");
  w.u16(static_cast<std::uint16_t>(ws.size()));
  for (const auto& s : ws) {
    w.i32(s.lo);
    w.i32(s.hi);
  }
}

std::vector<SymbolWindow> read_windows(Reader& r) {
  std::vector<SymbolWindow> ws(r.u16());
  for (auto& s : ws) {
    s.lo = r.i32();
    s.hi = r.i32();
    if (s.hi < s.lo) r.fail("empty symbol window");
  }
  return ws;
}

void write_payload(Writer& w, const std::vector<std::uint8_t>& p) {
  w.u32(static_cast<std::uint32_t>(p.size()));
  w.bytes(p.data(), p.size());
}

std::vector<std::uint8_t> read_payload(Reader& r) {
  const std::uint32_t n = r.u32();
  const auto s = r.bytes(n);
  return {s.begin(), s.end()};
}

}  // namespace

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs) {
  Writer w;
  w.bytes("LHFC", 4);
  w.u8(kBitstreamVersion);
  w.u32(bs.width);
  w.u32(bs.height);
  w.u16(bs.model_id);
  w.u8(bs.lambda_index);
  write_windows(w, bs.z_windows);
  write_windows(w, bs.y_windows);
  write_payload(w, bs.z_payload);
  write_payload(w, bs.y_payload);
  return w.take();
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "bitstream");
  check_magic(r, "LHFC", kBitstreamVersion);
  Bitstream bs;
  bs.width = r.u32();
  bs.height = r.u32();
  if (bs.width == 0 || bs.height == 0) r.fail("zero image dimension");
  bs.model_id = r.u16();
  bs.lambda_index = r.u8();
  bs.z_windows = read_windows(r);
  bs.y_windows = read_windows(r);
  bs.z_payload = read_payload(r);
  bs.y_payload = read_payload(r);
  if (r.remaining() != 0) r.fail("trailing bytes after y payload");
  return bs;
}

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  nlohmann::json j = nlohmann::json::parse(config_to_json(model.config));
  if (model.lambda_index >= 0) j["lambda_index"] = model.lambda_index;
  const std::string text = j.dump();

  Writer w;
  w.bytes("LHFW", 4);
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.u32(static_cast<std::uint32_t>(model.params.tensors.size()));
  for (const auto& [name, t] : model.params.tensors) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    const Shape& s = t.shape();
    w.u8(4);
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Model parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "checkpoint");
  check_magic(r, "LHFW", kCheckpointVersion);
  Model m;
  const auto text = r.bytes(r.u32());
  const std::string json_text(text.begin(), text.end());
  m.config = config_from_json(json_text);
  try {
    m.lambda_index = nlohmann::json::parse(json_text).value("lambda_index", -1);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nb = r.bytes(r.u16());
    std::string name(nb.begin(), nb.end());
    if (r.u8() != 4) r.fail("tensor '" + name + "' is not rank 4");
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0 ||
        s.numel() > r.remaining() / 4) {
      r.fail("tensor '" + name + "' has invalid dims " + s.str());
    }
    Tensor t(s);
    for (double& v : t.data()) v = r.f32();
    if (!t.all_finite()) r.fail("tensor '" + name + "' holds non-finite values");
    if (!m.params.tensors.emplace(std::move(name), std::move(t)).second) {
      r.fail("duplicate tensor");
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes");
  check_model(m);
  return m;
}

void save_checkpoint(const std::string& path, const Model& model) {
  write_file(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::string& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const ShapeError& e) {
    throw FormatError(path + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace lhfc
