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

#include "lhfc/model.hpp"

#include <set>

#include "lhfc/entropy.hpp"
#include "lhfc/error.hpp"

namespace lhfc {

std::map<std::string, Shape> model_param_shapes(const HFTConfig& config) {
  std::map<std::string, Shape> out = transform_param_shapes(config);
  out.merge(prior_param_shapes(config.hyper_channels));
  out.merge(context_param_shapes(config));
  return out;
}

Model init_model(const HFTConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  std::map<std::string, Shape> shapes = transform_param_shapes(config);
  shapes.merge(context_param_shapes(config));
  init_params(shapes, seed, m.params);
  set_logistic_prior(1.0, config.hyper_channels, m.params);
  return m;
}

void check_model(const Model& model) {
  model.config.validate();
  const auto shapes = model_param_shapes(model.config);
  for (const auto& [name, shape] : shapes) {
    auto it = model.params.tensors.find(name);
    if (it == model.params.tensors.end()) {
      throw ShapeError("checkpoint lacks parameter '" + name + "'");
    }
    if (!(it->second.shape() == shape)) {
      throw ShapeError("parameter '" + name + "' has shape " +
                       it->second.shape().str() + ", architecture expects " +
                       shape.str());
    }
  }
  for (const auto& [name, t] : model.params.tensors) {
    if (!shapes.contains(name)) {
      throw ShapeError("parameter '" + name + "' is not part of architecture '" +
                       model.config.name + "'");
    }
  }
}

ArchSpec arch_spec_from_config(const HFTConfig& config) {
  config.validate();
  ArchSpec spec;
  spec.name = config.name;
  spec.description = "hierarchical transform generated from its config";
  const int k = config.kernel;
  const int m = config.latent_channels;
  const int y_down = 1 << config.stages;

  SubNetwork ga{"g_a", "analysis", 3, 1, 1, {}};
  int c = 3;
  for (int s = 1; s <= config.stages; ++s) {
    const int co = config.stage_channels(s);
    const std::string sid = "ga.s" + std::to_string(s);
    ga.layers.push_back({sid + ".down", ArchLayerKind::kConv, c, co, k, 2, 1});
    if (config.res_blocks(s) > 0) {
      ga.layers.push_back({sid + ".res", ArchLayerKind::kResidualBlock, co, co,
                           3, 1, config.res_blocks(s)});
    }
    c = co;
  }

  SubNetwork gs{"g_s", "synthesis", m, y_down, 1, {}};
  for (int s = config.stages; s >= 1; --s) {
    const int ci = config.stage_channels(s);
    const int co = s > 1 ? config.stage_channels(s - 1) : 3;
    const std::string sid = "gs.s" + std::to_string(s);
    if (config.res_blocks(s) > 0) {
      gs.layers.push_back({sid + ".res", ArchLayerKind::kResidualBlock, ci, ci,
                           3, 1, config.res_blocks(s)});
    }
    gs.layers.push_back(
        {sid + ".up", ArchLayerKind::kConvTranspose, ci, co, k, 2, 1});
  }

  const int mz = config.hyper_channels;
  SubNetwork ha{"h_a", "hyper", m, y_down, 1,
                {{"ha.0", ArchLayerKind::kConv, m, mz, k, 2, 1},
                 {"ha.1", ArchLayerKind::kConv, mz, mz, k, 2, 1}}};
  SubNetwork hs{"h_s", "hyper", mz, 4 * y_down, 1,
                {{"hs.0", ArchLayerKind::kConvTranspose, mz, mz, k, 2, 1},
                 {"hs.1", ArchLayerKind::kConvTranspose, mz, 2 * m, k, 2, 1}}};
  spec.subnets = {ga, gs, ha, hs};

  int offset = 0;
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const int s = config.groups[g];
    const std::string gid = "ctx.g" + std::to_string(g);
    // The checkerboard conv only feeds the non-anchor pass.
    spec.subnets.push_back(
        {gid + ".cb", "context", s, y_down, 1,
         {{gid + ".cb", ArchLayerKind::kConv, s, 2 * s, config.context_kernel,
           1, 1}}});
    const int fused = 2 * m + offset + 2 * s;
    spec.subnets.push_back(
        {gid + ".fusion", "context", fused, y_down, 2,
         {{gid + ".f0", ArchLayerKind::kPointwise, fused,
           config.context_hidden, 1, 1, 1},
          {gid + ".f1", ArchLayerKind::kPointwise, config.context_hidden,
           2 * s, 1, 1, 1}}});
    offset += s;
  }
  return spec;
}

Tensor pad_replicate(const Tensor& x, int multiple) {
  if (multiple <= 0) throw ArgumentError("pad multiple must be positive");
  const Shape s = x.shape();
  const int hp = (s.h + multiple - 1) / multiple * multiple;
  const int wp = (s.w + multiple - 1) / multiple * multiple;
  if (hp == s.h && wp == s.w) return x;
  Tensor out(Shape{s.n, s.c, hp, wp});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < hp; ++h)
        for (int w = 0; w < wp; ++w)
          out.at(n, c, h, w) =
              x.at(n, c, std::min(h, s.h - 1), std::min(w, s.w - 1));
  return out;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Var blend(Var anchor, Var non_anchor, Var mask_a, Var mask_n) {
  return anchor * mask_a + non_anchor * mask_n;
}

}  // namespace

RDForward rd_forward(Tape& tape, const Tensor& x, const ParamVars& params,
                     const HFTConfig& config, QuantMode mode,
                     std::uint64_t seed) {
  const Shape xs = x.shape();
  if (xs.c != 3) {
    throw ShapeError("rd_forward: expected a 3-channel image, got " + xs.str());
  }
  const Tensor xp = pad_replicate(x, config.pad_multiple());
  const StagePlan plan =
      plan_stages(config, Dims{3, xp.shape().h, xp.shape().w});

  RDForward out;
  Var xv = tape.constant(xp);
  out.y = analysis(xv, params, plan);
  Var z = hyper_transform(out.y, params, plan, HyperDirection::kAnalysis);
  const Quantized zq = quantize(z, mode, {}, derive_seed(seed, 0));
  out.bits_z = sum(factorized_bits(zq.rate, params));
  Var features =
      hyper_transform(zq.distortion, params, plan, HyperDirection::kSynthesis);

  const ContextSchedule schedule(config.groups);
  std::vector<Var> hat, mus, sigmas, bits;
  for (int g = 0; g < schedule.num_groups(); ++g) {
    const int off = schedule.group_offset(g);
    Var yg = slice_channels(out.y, off, off + schedule.group_size(g));
    Var mask_a = tape.constant(
        ContextSchedule::parity_mask(yg.shape(), Parity::kAnchor));
    Var mask_n = tape.constant(
        ContextSchedule::parity_mask(yg.shape(), Parity::kNonAnchor));
    const Slice& sa = schedule.slices()[2 * g];
    const Slice& sn = schedule.slices()[2 * g + 1];

    // The anchor pass never reads group g itself; yg only fills the slot.
    std::vector<Var> parts = hat;
    parts.push_back(yg);
    const CondGaussianParams pa =
        slice_params(concat_channels(parts), features, sa, schedule, params, config);
    const Quantized qa = quantize(yg, mode, pa.mu, derive_seed(seed, 1 + 2 * g));

    parts.back() = qa.distortion;
    const CondGaussianParams pn =
        slice_params(concat_channels(parts), features, sn, schedule, params, config);
    const Quantized qn = quantize(yg, mode, pn.mu, derive_seed(seed, 2 + 2 * g));

    Var mu = blend(pa.mu, pn.mu, mask_a, mask_n);
    Var sigma = blend(pa.sigma, pn.sigma, mask_a, mask_n);
    Var rate = blend(qa.rate, qn.rate, mask_a, mask_n);
    hat.push_back(blend(qa.distortion, qn.distortion, mask_a, mask_n));
    mus.push_back(mu);
    sigmas.push_back(sigma);
    bits.push_back(sum(gaussian_bits(rate, mu, sigma)));
  }
  out.bits_y = bits.front();
  for (std::size_t i = 1; i < bits.size(); ++i) out.bits_y = out.bits_y + bits[i];
  out.y_hat = concat_channels(hat);
  out.mu = concat_channels(mus);
  out.sigma = concat_channels(sigmas);
  out.x_hat = crop(synthesis(out.y_hat, params, plan), xs.h, xs.w);
  return out;
}

}  // namespace lhfc
