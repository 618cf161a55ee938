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

#include "lhfc/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "lhfc/error.hpp"

namespace lhfc {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  // Next whitespace-separated header token, skipping '#' comments.
  std::string token() {
    for (;;) {
      while (pos_ < b_.size() && std::isspace(b_[pos_])) ++pos_;
      if (pos_ < b_.size() && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_]) && b_[pos_] != '#') {
      t.push_back(static_cast<char>(b_[pos_++]));
    }
    if (t.empty()) throw FormatError("PPM: truncated header");
    return t;
  }

  int number(const char* what) {
    const std::string t = token();
    if (t.size() > 9 || !std::all_of(t.begin(), t.end(), ::isdigit)) {
      throw FormatError(std::string("PPM: bad ") + what + " '" + t + "'");
    }
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) {
      throw FormatError("PPM: missing separator before raster");
    }
    return pos_ + 1;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

Image8 decode_ppm(const std::vector<std::uint8_t>& bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token();
  if (magic != "P6") {
    throw FormatError("unsupported image format '" + magic.substr(0, 8) +
                      "'; only binary PPM (P6) is supported");
  }
  Image8 img;
  img.width = r.number("width");
  img.height = r.number("height");
  const int maxval = r.number("maxval");
  if (img.width <= 0 || img.height <= 0) throw FormatError("PPM: empty image");
  if (maxval != 255) throw FormatError("PPM: only 8-bit images (maxval 255)");
  const std::size_t start = r.raster_start();
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - start < need) throw FormatError("PPM: truncated raster");
  img.rgb.assign(bytes.begin() + start, bytes.begin() + start + need);
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image8& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path);
}

Image8 read_ppm(const std::string& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_ppm(const std::string& path, const Image8& image) {
  write_file(path, encode_ppm(image));
}

Tensor to_tensor(const Image8& image) {
  Tensor t(Shape{1, 3, image.height, image.width});
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(0, c, y, x) = image.rgb[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] / 255.0;
  return t;
}

Image8 to_image(const Tensor& x) {
  const Shape s = x.shape();
  if (s.n != 1 || s.c != 3) {
    throw ShapeError("to_image: expected (1,3,h,w), got " + s.str());
  }
  Image8 img;
  img.width = s.w;
  img.height = s.h;
  img.rgb.resize(static_cast<std::size_t>(s.w) * s.h * 3);
  for (int y = 0; y < s.h; ++y)
    for (int xx = 0; xx < s.w; ++xx)
      for (int c = 0; c < 3; ++c) {
        const double raw = x.at(0, c, y, xx);
        const double v = std::isnan(raw) ? 0.0 : std::clamp(raw, 0.0, 1.0);
        img.rgb[(static_cast<std::size_t>(y) * s.w + xx) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

Tensor round_to_8bit(const Tensor& x) { return to_tensor(to_image(x)); }

}  // namespace lhfc
