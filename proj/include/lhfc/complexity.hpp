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
#include <map>
#include <string>
#include <vector>

namespace lhfc {

// Static multiply-accumulate accounting. Only multiplications of weights by
// activations are counted; additions, activations and reshuffles are free.

enum class ArchLayerKind {
  kConv,                   // k x k conv, padding k/2
  kConvTranspose,          // stride-s upsampling transposed conv
  kSubpelConv,             // k x k conv to c_out*s^2 channels + pixel shuffle
  kResidualBlock,          // two k x k convs at constant width + skip
  kResidualBlockStride,    // strided conv, conv, 1x1 strided skip
  kResidualBlockUpsample,  // sub-pixel conv, conv, sub-pixel skip
  kPointwise,              // 1x1 conv
  kElementwise,            // one multiply per element
};

std::string to_string(ArchLayerKind kind);
ArchLayerKind parse_layer_kind(const std::string& name);

struct ArchLayer {
  std::string id;
  ArchLayerKind kind = ArchLayerKind::kConv;
  int c_in = 0;
  int c_out = 0;
  int kernel = 1;
  int stride = 1;
  int repeat = 1;
};

// A sequential chain of layers walked from its own declared input: the
// channel count and the spatial downscale relative to the image.
struct SubNetwork {
  std::string name;
  std::string role;  // analysis | synthesis | hyper | context
  int input_channels = 3;
  int input_downscale = 1;
  int passes = 1;  // times the chain is evaluated per image
  std::vector<ArchLayer> layers;
};

struct ArchSpec {
  std::string name;
  std::string description;
  std::vector<SubNetwork> subnets;
};

struct FeatureDims {
  int c = 0;
  int h = 0;
  int w = 0;
  bool operator==(const FeatureDims&) const = default;
};

struct LayerMacs {
  std::int64_t macs = 0;
  FeatureDims output;
};

// MACs of one application of `layer` (repeat ignored) on `input`.
LayerMacs layer_macs(const ArchLayer& layer, FeatureDims input);

struct LayerReport {
  std::string subnet;
  std::string role;
  std::string id;
  std::int64_t macs = 0;  // including repeat and passes
  double mac_per_pixel = 0.0;
  FeatureDims output;
};

struct ComplexityReport {
  std::string name;
  int height = 0;
  int width = 0;
  std::vector<LayerReport> layers;
  std::map<std::string, std::int64_t> role_macs;
  std::int64_t total_macs = 0;

  double kmac_per_pixel() const;
  double role_kmac_per_pixel(const std::string& role) const;
};

ComplexityReport model_report(const ArchSpec& spec, int height, int width);

struct ComparisonRow {
  std::string name;
  double kmac_per_pixel = 0.0;
  double ratio = 0.0;  // relative to the first report
};

std::vector<ComparisonRow> compare(const std::vector<ComplexityReport>& reports);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_table(const std::vector<ComplexityReport>& reports,
                             const std::vector<ComparisonRow>& rows);
std::string report_csv(const ComplexityReport& report);

ArchSpec parse_arch_spec(const std::string& json_text);
ArchSpec load_arch_spec(const std::string& path);
std::string arch_spec_to_json(const ArchSpec& spec);

}  // namespace lhfc
