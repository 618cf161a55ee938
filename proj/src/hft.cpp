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

#include "lhfc/hft.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lhfc/error.hpp"

namespace lhfc {

using json = nlohmann::json;

int HFTConfig::res_blocks(int stage) const {
  if (!stage_res_blocks.empty()) return stage_res_blocks.at(stage - 1);
  return res_blocks_per_stage;
}

int HFTConfig::stage_channels(int stage) const {
  if (stage == stages) return latent_channels;
  return base_channels << (stage - 1);
}

void HFTConfig::validate() const {
  auto fail = [&](const std::string& what) {
    throw ArgumentError("invalid architecture '" + name + "': " + what);
  };
  if (base_channels <= 0) fail("base_channels must be positive");
  if (stages <= 0 || stages > 8) fail("stages must be in [1, 8]");
  if (latent_channels <= 0) fail("latent_channels must be positive");
  if (kernel <= 0 || kernel % 2 == 0) fail("kernel must be odd and positive");
  if (res_blocks_per_stage < 0) fail("res_blocks_per_stage must be >= 0");
  if (!stage_res_blocks.empty()) {
    if (static_cast<int>(stage_res_blocks.size()) != stages)
      fail("stage_res_blocks needs one entry per stage");
    for (int r : stage_res_blocks)
      if (r < 0) fail("stage_res_blocks entries must be >= 0");
  }
  if (hyper_channels <= 0) fail("hyper_channels must be positive");
  if (groups.empty()) fail("groups must not be empty");
  for (int g : groups)
    if (g <= 0) fail("group sizes must be positive");
  if (std::accumulate(groups.begin(), groups.end(), 0) != latent_channels)
    fail("group sizes must sum to latent_channels");
  if (context_hidden <= 0) fail("context_hidden must be positive");
  if (context_kernel <= 0 || context_kernel % 2 == 0)
    fail("context_kernel must be odd and positive");
}

HFTConfig reference_config() {
  HFTConfig c;
  c.name = "loc-lic-ref";
  c.model_id = 1;
  c.base_channels = 64;
  c.stages = 4;
  c.latent_channels = 320;
  c.kernel = 5;
  c.res_blocks_per_stage = 2;
  // Full-resolution stage runs without residual blocks; see README.
  c.stage_res_blocks = {0, 2, 2, 2};
  c.hyper_channels = 192;
  c.groups = {16, 16, 32, 256};
  c.context_hidden = 256;
  c.context_kernel = 5;
  return c;
}

HFTConfig toy_config() {
  HFTConfig c;
  c.name = "toy";
  c.model_id = 2;
  c.base_channels = 8;
  c.stages = 3;
  c.latent_channels = 16;
  c.kernel = 5;
  c.res_blocks_per_stage = 1;
  c.hyper_channels = 8;
  c.groups = {1, 1, 2, 12};
  c.context_hidden = 32;
  c.context_kernel = 5;
  return c;
}

HFTConfig tiny_config() {
  HFTConfig c;
  c.name = "tiny";
  c.model_id = 3;
  c.base_channels = 4;
  c.stages = 3;
  c.latent_channels = 8;
  c.kernel = 5;
  c.res_blocks_per_stage = 1;
  c.hyper_channels = 4;
  c.groups = {1, 1, 1, 5};
  c.context_hidden = 16;
  c.context_kernel = 3;
  return c;
}

std::string config_to_json(const HFTConfig& c) {
  json j;
  j["name"] = c.name;
  j["model_id"] = c.model_id;
  j["base_channels"] = c.base_channels;
  j["stages"] = c.stages;
  j["latent_channels"] = c.latent_channels;
  j["kernel"] = c.kernel;
  j["res_blocks_per_stage"] = c.res_blocks_per_stage;
  if (!c.stage_res_blocks.empty()) j["stage_res_blocks"] = c.stage_res_blocks;
  j["hyper_channels"] = c.hyper_channels;
  j["groups"] = c.groups;
  j["context_hidden"] = c.context_hidden;
  j["context_kernel"] = c.context_kernel;
  return j.dump(2);
}

namespace {

HFTConfig config_from(const json& j) {
  HFTConfig c;
  try {
    c.name = j.value("name", std::string("custom"));
    c.model_id = j.value("model_id", std::uint16_t{0});
    c.base_channels = j.at("base_channels").get<int>();
    c.stages = j.at("stages").get<int>();
    c.latent_channels = j.at("latent_channels").get<int>();
    c.kernel = j.value("kernel", 5);
    c.res_blocks_per_stage = j.value("res_blocks_per_stage", 0);
    c.stage_res_blocks =
        j.value("stage_res_blocks", std::vector<int>{});
    c.hyper_channels = j.value("hyper_channels", c.latent_channels);
    if (j.contains("groups")) {
      c.groups = j.at("groups").get<std::vector<int>>();
    } else {
      c.groups = {c.latent_channels};
    }
    c.context_hidden = j.value("context_hidden", 2 * c.latent_channels);
    c.context_kernel = j.value("context_kernel", 5);
  } catch (const json::exception& e) {
    throw FormatError(std::string("architecture config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

HFTConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("architecture config: ") + e.what());
  }
  return config_from(j);
}

HFTConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open architecture config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

StagePlan plan_stages(const HFTConfig& config, Dims input) {
  config.validate();
  const int factor = 1 << config.stages;
  if (input.h <= 0 || input.w <= 0 || input.h % factor != 0 ||
      input.w % factor != 0) {
    throw ShapeError("input " + std::to_string(input.h) + "x" +
                     std::to_string(input.w) + " is not a multiple of " +
                     std::to_string(factor) +
                     "; pad the image to a multiple of 2^stages first");
  }
  StagePlan plan;
  plan.input = input;
  const int k = config.kernel;

  Dims cur = input;
  for (int s = 1; s <= config.stages; ++s) {
    const std::string sid = "ga.s" + std::to_string(s);
    const int c = config.stage_channels(s);
    Dims next{c, cur.h / 2, cur.w / 2};
    plan.analysis.push_back(
        {sid + ".down", LayerKind::kConv, cur.c, c, k, 2, next.h, next.w, true});
    for (int r = 0; r < config.res_blocks(s); ++r) {
      plan.analysis.push_back({sid + ".res" + std::to_string(r),
                               LayerKind::kResidual, c, c, 3, 1, next.h,
                               next.w, false});
    }
    plan.analysis_stages.push_back(next);
    cur = next;
  }
  plan.latent = cur;

  // Exact shape reversal of the analysis schedule.
  for (int s = config.stages; s >= 1; --s) {
    const std::string sid = "gs.s" + std::to_string(s);
    const Dims here = plan.analysis_stages[s - 1];
    const Dims below = s > 1 ? plan.analysis_stages[s - 2] : input;
    for (int r = 0; r < config.res_blocks(s); ++r) {
      plan.synthesis.push_back({sid + ".res" + std::to_string(r),
                                LayerKind::kResidual, here.c, here.c, 3, 1,
                                here.h, here.w, false});
    }
    plan.synthesis.push_back({sid + ".up", LayerKind::kConvTranspose, here.c,
                              below.c, k, 2, below.h, below.w, s > 1});
  }

  const int mz = config.hyper_channels;
  const Dims y = plan.latent;
  const int h1 = (y.h + 1) / 2, w1 = (y.w + 1) / 2;
  const int h2 = (h1 + 1) / 2, w2 = (w1 + 1) / 2;
  plan.hyper_analysis = {
      {"ha.0", LayerKind::kConv, y.c, mz, k, 2, h1, w1, true},
      {"ha.1", LayerKind::kConv, mz, mz, k, 2, h2, w2, false},
  };
  plan.hyper_latent = {mz, h2, w2};
  plan.hyper_synthesis = {
      {"hs.0", LayerKind::kConvTranspose, mz, mz, k, 2, 2 * h2, 2 * w2, true},
      {"hs.1", LayerKind::kConvTranspose, mz, 2 * y.c, k, 2, 4 * h2, 4 * w2,
       false},
  };
  return plan;
}

namespace {

void add_layer_shapes(const PlannedLayer& l,
                      std::map<std::string, Shape>& out) {
  switch (l.kind) {
    case LayerKind::kConv:
      out[l.id + ".w"] = Shape{l.c_out, l.c_in, l.kernel, l.kernel};
      out[l.id + ".b"] = Shape{1, l.c_out, 1, 1};
      break;
    case LayerKind::kConvTranspose:
      out[l.id + ".w"] = Shape{l.c_in, l.c_out, l.kernel, l.kernel};
      out[l.id + ".b"] = Shape{1, l.c_out, 1, 1};
      break;
    case LayerKind::kResidual:
      for (const char* sub : {".conv1", ".conv2"}) {
        out[l.id + sub + ".w"] = Shape{l.c_out, l.c_in, 3, 3};
        out[l.id + sub + ".b"] = Shape{1, l.c_out, 1, 1};
      }
      break;
  }
}

}  // namespace

std::map<std::string, Shape> transform_param_shapes(const HFTConfig& config) {
  // Parameter shapes do not depend on spatial size; plan at the smallest
  // legal input.
  const int f = config.pad_multiple();
  const StagePlan plan = plan_stages(config, Dims{3, f, f});
  std::map<std::string, Shape> out;
  for (const auto* list : {&plan.analysis, &plan.synthesis,
                           &plan.hyper_analysis, &plan.hyper_synthesis}) {
    for (const PlannedLayer& l : *list) add_layer_shapes(l, out);
  }
  return out;
}

ParamVars bind_params(Tape& tape, const ModelParams& params,
                      bool requires_grad) {
  ParamVars vars;
  for (const auto& [name, t] : params.tensors) {
    vars.emplace(name, tape.leaf(t, requires_grad));
  }
  return vars;
}

Var param(const ParamVars& params, const std::string& name,
          const Shape& expected) {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ShapeError("missing parameter for layer '" + name + "'");
  }
  if (!(it->second.shape() == expected)) {
    throw ShapeError("parameter '" + name + "' has shape " +
                     it->second.shape().str() + ", layer expects " +
                     expected.str());
  }
  return it->second;
}

void init_params(const std::map<std::string, Shape>& shapes,
                 std::uint64_t seed, ModelParams& out) {
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : shapes) {
    Tensor t(shape, 0.0);
    const bool is_weight = name.size() > 2 && name.ends_with(".w");
    if (is_weight) {
      // Uniform with variance 1/fan_in; the second conv of a residual branch
      // starts small so every block begins close to identity.
      const double fan_in =
          static_cast<double>(shape.c) * shape.h * shape.w;
      double bound = std::sqrt(3.0 / fan_in);
      if (name.find(".conv2.") != std::string::npos) bound *= 0.1;
      for (double& v : t.data()) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = (2.0 * u - 1.0) * bound;
      }
    }
    out.tensors[name] = std::move(t);
  }
}

namespace {

Var apply_layer(Var x, const PlannedLayer& l, const ParamVars& params) {
  const int pad = l.kernel / 2;
  Var out;
  switch (l.kind) {
    case LayerKind::kConv:
      out = conv2d(x, param(params, l.id + ".w",
                            Shape{l.c_out, l.c_in, l.kernel, l.kernel}),
                   param(params, l.id + ".b", Shape{1, l.c_out, 1, 1}),
                   l.stride, pad);
      break;
    case LayerKind::kConvTranspose:
      out = conv2d_transpose(
          x, param(params, l.id + ".w",
                   Shape{l.c_in, l.c_out, l.kernel, l.kernel}),
          param(params, l.id + ".b", Shape{1, l.c_out, 1, 1}), l.stride, pad,
          l.stride - 1);
      break;
    case LayerKind::kResidual: {
      const Shape ws{l.c_out, l.c_in, 3, 3};
      const Shape bs{1, l.c_out, 1, 1};
      Var h = conv2d(x, param(params, l.id + ".conv1.w", ws),
                     param(params, l.id + ".conv1.b", bs), 1, 1);
      h = conv2d(leaky_relu(h), param(params, l.id + ".conv2.w", ws),
                 param(params, l.id + ".conv2.b", bs), 1, 1);
      out = x + h;
      break;
    }
  }
  if (out.shape().h != l.h_out || out.shape().w != l.w_out) {
    throw ShapeError("layer '" + l.id + "' produced " + out.shape().str() +
                     ", plan expects " + std::to_string(l.h_out) + "x" +
                     std::to_string(l.w_out));
  }
  return l.activation ? leaky_relu(out) : out;
}

void check_input(const char* what, Var x, const Dims& d) {
  const Shape& s = x.shape();
  if (s.c != d.c || s.h != d.h || s.w != d.w) {
    throw ShapeError(std::string(what) + ": input " + s.str() +
                     " does not match plan (" + std::to_string(d.c) + "," +
                     std::to_string(d.h) + "," + std::to_string(d.w) + ")");
  }
}

}  // namespace

Var analysis(Var x, const ParamVars& params, const StagePlan& plan,
             std::vector<Dims>* trace) {
  check_input("analysis", x, plan.input);
  Var cur = x;
  for (std::size_t i = 0; i < plan.analysis.size(); ++i) {
    cur = apply_layer(cur, plan.analysis[i], params);
    const bool stage_end = i + 1 == plan.analysis.size() ||
                           plan.analysis[i + 1].kind == LayerKind::kConv;
    if (trace && stage_end) {
      trace->push_back({cur.shape().c, cur.shape().h, cur.shape().w});
    }
  }
  return cur;
}

Var synthesis(Var y_hat, const ParamVars& params, const StagePlan& plan) {
  check_input("synthesis", y_hat, plan.latent);
  Var cur = y_hat;
  for (const PlannedLayer& l : plan.synthesis) cur = apply_layer(cur, l, params);
  return cur;
}

Var hyper_transform(Var input, const ParamVars& params, const StagePlan& plan,
                    HyperDirection direction) {
  const auto& layers = direction == HyperDirection::kAnalysis
                           ? plan.hyper_analysis
                           : plan.hyper_synthesis;
  check_input(direction == HyperDirection::kAnalysis ? "hyper analysis"
                                                     : "hyper synthesis",
              input,
              direction == HyperDirection::kAnalysis ? plan.latent
                                                     : plan.hyper_latent);
  Var cur = input;
  for (const PlannedLayer& l : layers) cur = apply_layer(cur, l, params);
  return cur;
}

}  // namespace lhfc
