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
#include <string>
#include <vector>

#include "lhfc/formats.hpp"
#include "lhfc/metrics.hpp"
#include "lhfc/model.hpp"

namespace lhfc {

// Default symbol window of every latent channel; widened per channel when
// the data needs it, up to kMaxWindowSymbols symbols.
inline constexpr int kWindowLo = -64;
inline constexpr int kWindowHi = 63;
inline constexpr int kMaxWindowSymbols = 1 << 14;

struct EncodeStats {
  std::size_t z_bits = 0;  // payload bits, terminators included
  std::size_t y_bits = 0;
  double estimated_z_bits = 0.0;  // hard-mode entropy model estimate
  double estimated_y_bits = 0.0;
  double bpp = 0.0;  // (z_bits + y_bits) / (width * height)
  double estimated_bpp = 0.0;
};

struct EncodeResult {
  Bitstream bitstream;
  Tensor reconstruction;  // cropped, unclamped
  Tensor z_hat;
  Tensor y_hat;
  EncodeStats stats;
};

struct DecodeResult {
  Tensor reconstruction;  // cropped, unclamped
  Tensor z_hat;
  Tensor y_hat;
};

// x is (1, 3, h, w) with values in [0, 1].
EncodeResult encode_image(const Model& model, const Tensor& x);
DecodeResult decode_image(const Model& model, const Bitstream& bitstream);

// File-level wrappers used by the CLI.
EncodeStats encode_file(const std::string& image_path,
                        const std::string& checkpoint_path,
                        const std::string& output_path);
void decode_file(const std::string& bitstream_path,
                 const std::string& checkpoint_path,
                 const std::string& output_path);

// Sorted *.ppm files of a directory.
std::vector<std::string> list_images(const std::string& directory);

struct BenchImage {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
};

// Codes one image and scores the 8-bit reconstruction.
BenchImage bench_image(const Model& model, const Tensor& x);

// One RD point per checkpoint, averaged over every image. `threads` workers
// share the images of a checkpoint; results do not depend on it.
std::vector<RDCurve> run_bench(const std::vector<std::string>& checkpoints,
                               const std::string& image_directory,
                               int threads = 1);

// LOC_LIC_THREADS, or 1 when unset or invalid.
int bench_threads_from_env();

}  // namespace lhfc
