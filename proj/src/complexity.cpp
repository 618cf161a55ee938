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

#include "lhfc/complexity.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "lhfc/error.hpp"

namespace lhfc {

using json = nlohmann::json;

namespace {

struct KindName {
  ArchLayerKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ArchLayerKind::kConv, "conv"},
    {ArchLayerKind::kConvTranspose, "conv_transpose"},
    {ArchLayerKind::kSubpelConv, "subpel_conv"},
    {ArchLayerKind::kResidualBlock, "residual_block"},
    {ArchLayerKind::kResidualBlockStride, "residual_block_stride"},
    {ArchLayerKind::kResidualBlockUpsample, "residual_block_upsample"},
    {ArchLayerKind::kPointwise, "pointwise"},
    {ArchLayerKind::kElementwise, "elementwise"},
};

int down(int v, int s) { return (v + s - 1) / s; }

}  // namespace

std::string to_string(ArchLayerKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "?";
}

ArchLayerKind parse_layer_kind(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw FormatError("unknown layer kind '" + name + "'");
}

LayerMacs layer_macs(const ArchLayer& l, FeatureDims in) {
  auto fail = [&](const std::string& what) {
    throw ShapeError("layer '" + l.id + "': " + what);
  };
  if (in.c != l.c_in) {
    fail("expects " + std::to_string(l.c_in) + " input channels, got " +
         std::to_string(in.c));
  }
  if (l.kernel <= 0 || l.stride <= 0 || l.c_out <= 0) {
    fail("kernel, stride and c_out must be positive");
  }
  const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
  const std::int64_t cin = l.c_in;
  const std::int64_t cout = l.c_out;
  const std::int64_t in_px = static_cast<std::int64_t>(in.h) * in.w;
  const std::int64_t s2 = static_cast<std::int64_t>(l.stride) * l.stride;
  LayerMacs r;
  switch (l.kind) {
    case ArchLayerKind::kConv: {
      r.output = {l.c_out, down(in.h, l.stride), down(in.w, l.stride)};
      r.macs = k2 * cin * cout * r.output.h * r.output.w;
      break;
    }
    case ArchLayerKind::kConvTranspose:
      // Each input element meets every kernel tap once.
      r.output = {l.c_out, in.h * l.stride, in.w * l.stride};
      r.macs = k2 * cin * cout * in_px;
      break;
    case ArchLayerKind::kSubpelConv:
      r.output = {l.c_out, in.h * l.stride, in.w * l.stride};
      r.macs = k2 * cin * cout * s2 * in_px;
      break;
    case ArchLayerKind::kResidualBlock:
      if (l.c_in != l.c_out || l.stride != 1) {
        fail("residual_block needs c_in == c_out and stride 1");
      }
      r.output = in;
      r.macs = 2 * k2 * cin * cin * in_px;
      break;
    case ArchLayerKind::kResidualBlockStride: {
      r.output = {l.c_out, down(in.h, l.stride), down(in.w, l.stride)};
      const std::int64_t out_px = static_cast<std::int64_t>(r.output.h) * r.output.w;
      const bool skip = l.stride != 1 || l.c_in != l.c_out;
      r.macs = (k2 * cin * cout + k2 * cout * cout + (skip ? cin * cout : 0)) * out_px;
      break;
    }
    case ArchLayerKind::kResidualBlockUpsample: {
      r.output = {l.c_out, in.h * l.stride, in.w * l.stride};
      const std::int64_t out_px = static_cast<std::int64_t>(r.output.h) * r.output.w;
      r.macs = 2 * k2 * cin * cout * s2 * in_px + k2 * cout * cout * out_px;
      break;
    }
    case ArchLayerKind::kPointwise:
      if (l.stride != 1) fail("pointwise layers have stride 1");
      r.output = {l.c_out, in.h, in.w};
      r.macs = cin * cout * in_px;
      break;
    case ArchLayerKind::kElementwise:
      if (l.c_in != l.c_out) fail("elementwise needs c_in == c_out");
      r.output = in;
      r.macs = cin * in_px;
      break;
  }
  return r;
}

double ComplexityReport::kmac_per_pixel() const {
  return static_cast<double>(total_macs) /
         (static_cast<double>(height) * width) / 1000.0;
}

double ComplexityReport::role_kmac_per_pixel(const std::string& role) const {
  auto it = role_macs.find(role);
  if (it == role_macs.end()) return 0.0;
  return static_cast<double>(it->second) /
         (static_cast<double>(height) * width) / 1000.0;
}

ComplexityReport model_report(const ArchSpec& spec, int height, int width) {
  if (height <= 0 || width <= 0) {
    throw ArgumentError("model_report: image size must be positive");
  }
  ComplexityReport rep;
  rep.name = spec.name;
  rep.height = height;
  rep.width = width;
  const double pixels = static_cast<double>(height) * width;
  for (const SubNetwork& net : spec.subnets) {
    if (net.input_downscale <= 0 || height % net.input_downscale != 0 ||
        width % net.input_downscale != 0) {
      throw ShapeError("subnetwork '" + net.name + "': image " +
                       std::to_string(height) + "x" + std::to_string(width) +
                       " is not divisible by its downscale " +
                       std::to_string(net.input_downscale));
    }
    if (net.passes < 0) throw ArgumentError("passes must be >= 0");
    FeatureDims cur{net.input_channels, height / net.input_downscale,
                    width / net.input_downscale};
    for (const ArchLayer& layer : net.layers) {
      if (layer.repeat < 1) {
        throw ArgumentError("layer '" + layer.id + "': repeat must be >= 1");
      }
      std::int64_t macs = 0;
      for (int r = 0; r < layer.repeat; ++r) {
        const LayerMacs lm = layer_macs(layer, cur);
        macs += lm.macs;
        cur = lm.output;
      }
      macs *= net.passes;
      rep.layers.push_back({net.name, net.role, layer.id, macs,
                            static_cast<double>(macs) / pixels, cur});
      rep.role_macs[net.role] += macs;
      rep.total_macs += macs;
    }
  }
  return rep;
}

std::vector<ComparisonRow> compare(const std::vector<ComplexityReport>& reports) {
  if (reports.empty()) throw ArgumentError("compare: need at least one report");
  std::vector<ComparisonRow> rows;
  const double base = reports.front().kmac_per_pixel();
  for (const auto& r : reports) {
    const double k = r.kmac_per_pixel();
    rows.push_back({r.name, k, base > 0.0 ? k / base : 0.0});
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "name,kmac_per_pixel,ratio\n" << std::fixed;
  for (const auto& r : rows) {
    os << r.name << "," << std::setprecision(3) << r.kmac_per_pixel << ","
       << std::setprecision(4) << r.ratio << "\n";
  }
  return os.str();
}

std::string comparison_table(const std::vector<ComplexityReport>& reports,
                             const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "model" << std::right
     << std::setw(11) << "analysis" << std::setw(11) << "synthesis"
     << std::setw(11) << "hyper" << std::setw(11) << "context"
     << std::setw(11) << "total" << std::setw(9) << "ratio" << "\n";
  os << std::fixed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rep = reports[i];
    os << std::left << std::setw(static_cast<int>(width)) << rows[i].name
       << std::right << std::setprecision(1);
    for (const char* role : {"analysis", "synthesis", "hyper", "context"}) {
      os << std::setw(11) << rep.role_kmac_per_pixel(role);
    }
    os << std::setw(11) << rows[i].kmac_per_pixel << std::setw(9)
       << std::setprecision(4) << rows[i].ratio << "\n";
  }
  os << "(kMAC/pixel at " << reports.front().height << "x"
     << reports.front().width << ")\n";
  return os.str();
}

std::string report_csv(const ComplexityReport& report) {
  std::ostringstream os;
  os << "subnet,role,layer,macs,mac_per_pixel,c_out,h_out,w_out\n";
  for (const auto& l : report.layers) {
    os << l.subnet << "," << l.role << "," << l.id << "," << l.macs << ","
       << std::setprecision(10) << l.mac_per_pixel << "," << l.output.c << ","
       << l.output.h << "," << l.output.w << "\n";
  }
  return os.str();
}

namespace {

ArchSpec spec_from(const json& j) {
  ArchSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.description = j.value("description", std::string());
    for (const json& n : j.at("subnets")) {
      SubNetwork net;
      net.name = n.at("name").get<std::string>();
      net.role = n.value("role", net.name);
      net.input_channels = n.at("input_channels").get<int>();
      net.input_downscale = n.value("input_downscale", 1);
      net.passes = n.value("passes", 1);
      for (const json& l : n.at("layers")) {
        ArchLayer layer;
        layer.id = l.at("id").get<std::string>();
        layer.kind = parse_layer_kind(l.at("kind").get<std::string>());
        layer.c_in = l.at("c_in").get<int>();
        layer.c_out = l.at("c_out").get<int>();
        layer.kernel = l.value("k", 1);
        layer.stride = l.value("stride", 1);
        layer.repeat = l.value("repeat", 1);
        net.layers.push_back(layer);
      }
      spec.subnets.push_back(std::move(net));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("arch spec: ") + e.what());
  }
  return spec;
}

}  // namespace

ArchSpec parse_arch_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("arch spec: ") + e.what());
  }
  return spec_from(j);
}

ArchSpec load_arch_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open arch spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_arch_spec(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string arch_spec_to_json(const ArchSpec& spec) {
  json j;
  j["name"] = spec.name;
  if (!spec.description.empty()) j["description"] = spec.description;
  j["subnets"] = json::array();
  for (const auto& net : spec.subnets) {
    json n;
    n["name"] = net.name;
    n["role"] = net.role;
    n["input_channels"] = net.input_channels;
    n["input_downscale"] = net.input_downscale;
    n["passes"] = net.passes;
    n["layers"] = json::array();
    for (const auto& l : net.layers) {
      json lj;
      lj["id"] = l.id;
      lj["kind"] = to_string(l.kind);
      lj["c_in"] = l.c_in;
      lj["c_out"] = l.c_out;
      lj["k"] = l.kernel;
      lj["stride"] = l.stride;
      if (l.repeat != 1) lj["repeat"] = l.repeat;
      n["layers"].push_back(lj);
    }
    j["subnets"].push_back(n);
  }
  return j.dump(2);
}

}  // namespace lhfc
