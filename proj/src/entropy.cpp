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

#include "lhfc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lhfc/error.hpp"

namespace lhfc {
namespace {

constexpr double kLn2 = std::numbers::ln2;

double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Derivative of the logistic function, stable for large |v|.
double sigmoid_slope(double v) {
  const double e = std::exp(-std::abs(v));
  return e / ((1.0 + e) * (1.0 + e));
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Raw parameter pointers of one channel of the prior network.
struct ChannelView {
  std::array<const double*, 4> m;
  std::array<const double*, 4> b;
  std::array<const double*, 3> f;
};

struct PriorCache {
  // a[0] is the input; a[k+1] the output of nonlinearity k.
  std::array<std::array<double, 3>, 4> a{};
  std::array<std::array<double, 3>, 4> h{};
  double logit = 0.0;
};

void prior_forward(const ChannelView& v, double x, PriorCache& c) {
  c.a[0][0] = x;
  for (int k = 0; k < 4; ++k) {
    const int in = kPriorWidths[k];
    const int out = kPriorWidths[k + 1];
    for (int o = 0; o < out; ++o) {
      double acc = v.b[k][o];
      for (int i = 0; i < in; ++i) acc += softplus(v.m[k][o * in + i]) * c.a[k][i];
      c.h[k][o] = acc;
      if (k < 3) {
        c.a[k + 1][o] = acc + std::tanh(v.f[k][o]) * std::tanh(acc);
      }
    }
  }
  c.logit = c.h[3][0];
}

struct ChannelGrads {
  std::array<double*, 4> m;
  std::array<double*, 4> b;
  std::array<double*, 3> f;
};

// Backpropagates d(logit) through one cached evaluation. Parameter grads
// (those that are non-null) are accumulated; returns d/dx.
double prior_backward(const ChannelView& v, const PriorCache& c, double dlogit,
                      const ChannelGrads& g) {
  std::array<double, 3> dh{dlogit, 0.0, 0.0};
  for (int k = 3; k >= 0; --k) {
    const int in = kPriorWidths[k];
    const int out = kPriorWidths[k + 1];
    std::array<double, 3> da{0.0, 0.0, 0.0};
    for (int o = 0; o < out; ++o) {
      if (g.b[k]) g.b[k][o] += dh[o];
      for (int i = 0; i < in; ++i) {
        const double raw = v.m[k][o * in + i];
        if (g.m[k]) g.m[k][o * in + i] += dh[o] * c.a[k][i] * sigmoid(raw);
        da[i] += softplus(raw) * dh[o];
      }
    }
    if (k == 0) return da[0];
    // a[k] = h[k-1] + tanh(f) * tanh(h[k-1])
    for (int i = 0; i < in; ++i) {
      const double tf = std::tanh(v.f[k - 1][i]);
      const double th = std::tanh(c.h[k - 1][i]);
      if (g.f[k - 1]) g.f[k - 1][i] += da[i] * th * (1.0 - tf * tf);
      dh[i] = da[i] * (1.0 + tf * (1.0 - th * th));
    }
  }
  return 0.0;
}

std::string prior_name(char kind, int k) {
  return std::string("prior.") + kind + std::to_string(k);
}

ChannelView channel_view(const std::array<const Tensor*, 4>& m,
                         const std::array<const Tensor*, 4>& b,
                         const std::array<const Tensor*, 3>& f, int c) {
  ChannelView v;
  for (int k = 0; k < 4; ++k) {
    const int n = kPriorWidths[k] * kPriorWidths[k + 1];
    v.m[k] = m[k]->ptr() + static_cast<std::size_t>(c) * n;
    v.b[k] = b[k]->ptr() + static_cast<std::size_t>(c) * kPriorWidths[k + 1];
  }
  for (int k = 0; k < 3; ++k) {
    v.f[k] = f[k]->ptr() + static_cast<std::size_t>(c) * kPriorWidths[k + 1];
  }
  return v;
}

// p = C(v+0.5) - C(v-0.5) from two logits, on the stable side.
double interval_from_logits(double up, double lo) {
  const double s = (up + lo) > 0.0 ? -1.0 : 1.0;
  return std::abs(sigmoid(s * up) - sigmoid(s * lo));
}

std::vector<double> floor_and_normalize(std::vector<double> p) {
  double total = 0.0;
  for (double& v : p) {
    v = std::max(v, kPmfFloor);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_interval(double offset, double sigma) {
  const double d = std::abs(offset);
  return normal_cdf((0.5 - d) / sigma) - normal_cdf((-0.5 - d) / sigma);
}

// ---------------------------------------------------------------- prior

std::map<std::string, Shape> prior_param_shapes(int channels) {
  std::map<std::string, Shape> out;
  for (int k = 0; k < 4; ++k) {
    out[prior_name('m', k)] =
        Shape{1, channels, kPriorWidths[k + 1], kPriorWidths[k]};
    out[prior_name('b', k)] = Shape{1, channels, kPriorWidths[k + 1], 1};
  }
  for (int k = 0; k < 3; ++k) {
    out[prior_name('f', k)] = Shape{1, channels, kPriorWidths[k + 1], 1};
  }
  return out;
}

void set_logistic_prior(double scale, int channels, ModelParams& params) {
  // With zero biases and factors the network is linear with slope
  // 27 * softplus(m)^4; choose m so the slope is 1/scale.
  const double c = std::pow(1.0 / (27.0 * scale), 0.25);
  const double raw = std::log(std::expm1(c));
  for (const auto& [name, shape] : prior_param_shapes(channels)) {
    const bool matrix = name.starts_with("prior.m");
    params.tensors[name] = Tensor(shape, matrix ? raw : 0.0);
  }
}

FactorizedPrior FactorizedPrior::from_params(const ModelParams& params,
                                             int channels) {
  FactorizedPrior p;
  p.channels = channels;
  auto get = [&](const std::string& name, const Shape& s) {
    auto it = params.tensors.find(name);
    if (it == params.tensors.end()) {
      throw ShapeError("missing parameter for layer '" + name + "'");
    }
    if (!(it->second.shape() == s)) {
      throw ShapeError("parameter '" + name + "' has shape " +
                       it->second.shape().str() + ", expected " + s.str());
    }
    return it->second;
  };
  const auto shapes = prior_param_shapes(channels);
  for (int k = 0; k < 4; ++k) {
    p.matrices[k] = get(prior_name('m', k), shapes.at(prior_name('m', k)));
    p.biases[k] = get(prior_name('b', k), shapes.at(prior_name('b', k)));
  }
  for (int k = 0; k < 3; ++k) {
    p.factors[k] = get(prior_name('f', k), shapes.at(prior_name('f', k)));
  }
  return p;
}

double FactorizedPrior::logit(int channel, double x) const {
  const ChannelView v = channel_view(
      {&matrices[0], &matrices[1], &matrices[2], &matrices[3]},
      {&biases[0], &biases[1], &biases[2], &biases[3]},
      {&factors[0], &factors[1], &factors[2]}, channel);
  PriorCache c;
  prior_forward(v, x, c);
  return c.logit;
}

double FactorizedPrior::cdf(int channel, double x) const {
  return sigmoid(logit(channel, x));
}

double FactorizedPrior::interval(int channel, double v) const {
  return interval_from_logits(logit(channel, v + 0.5), logit(channel, v - 0.5));
}

RateResult factorized_rate(const Tensor& z_hat, const FactorizedPrior& prior) {
  const Shape& s = z_hat.shape();
  if (s.c != prior.channels) {
    throw ShapeError("factorized_rate: hyper-latent " + s.str() + " vs prior with " +
                     std::to_string(prior.channels) + " channels");
  }
  RateResult r;
  r.probabilities = Tensor(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          const double v = z_hat.at(n, c, h, w);
          if (v != std::round(v)) {
            throw ArgumentError("factorized_rate: hyper-latent is not integer-valued");
          }
          const double p = std::max(prior.interval(c, v), kPmfFloor);
          r.probabilities.at(n, c, h, w) = p;
          r.bits -= std::log2(p);
        }
  return r;
}

RateResult gaussian_rate(const Tensor& y_hat, const Tensor& mu,
                         const Tensor& sigma) {
  if (!(y_hat.shape() == mu.shape()) || !(y_hat.shape() == sigma.shape())) {
    throw ShapeError("gaussian_rate: latent " + y_hat.shape().str() + " mu " +
                     mu.shape().str() + " sigma " + sigma.shape().str());
  }
  RateResult r;
  r.probabilities = Tensor(y_hat.shape());
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    if (!(sigma[i] >= kSigmaMin)) {
      throw Error("internal: scale below sigma_min");
    }
    const double p = std::max(gaussian_interval(y_hat[i] - mu[i], sigma[i]), kPmfFloor);
    r.probabilities[i] = p;
    r.bits -= std::log2(p);
  }
  return r;
}

Var factorized_bits(Var z, const ParamVars& params) {
  const int channels = z.shape().c;
  const auto shapes = prior_param_shapes(channels);
  std::vector<Var> inputs{z};
  for (int k = 0; k < 4; ++k) {
    inputs.push_back(param(params, prior_name('m', k), shapes.at(prior_name('m', k))));
  }
  for (int k = 0; k < 4; ++k) {
    inputs.push_back(param(params, prior_name('b', k), shapes.at(prior_name('b', k))));
  }
  for (int k = 0; k < 3; ++k) {
    inputs.push_back(param(params, prior_name('f', k), shapes.at(prior_name('f', k))));
  }
  auto view_of = [inputs](int c) {
    return channel_view(
        {&inputs[1].value(), &inputs[2].value(), &inputs[3].value(), &inputs[4].value()},
        {&inputs[5].value(), &inputs[6].value(), &inputs[7].value(), &inputs[8].value()},
        {&inputs[9].value(), &inputs[10].value(), &inputs[11].value()}, c);
  };

  const Tensor& zv = z.value();
  const Shape s = zv.shape();
  Tensor bits(s);
  PriorCache up, lo;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const ChannelView v = view_of(c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const std::size_t at = zv.offset(n, c, 0, 0) + i;
        prior_forward(v, zv[at] + 0.5, up);
        prior_forward(v, zv[at] - 0.5, lo);
        const double p = interval_from_logits(up.logit, lo.logit);
        bits[at] = -std::log2(std::max(p, kTrainingFloor));
      }
    }

  return z.tape()->record(
      std::move(bits), inputs,
      [inputs, view_of, s](const Tensor& go, std::span<Tensor* const> gi) {
        const Tensor& zv = inputs[0].value();
        PriorCache up, lo;
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c) {
            const ChannelView v = view_of(c);
            ChannelGrads g{};
            for (int k = 0; k < 4; ++k) {
              const int nm = kPriorWidths[k] * kPriorWidths[k + 1];
              g.m[k] = gi[1 + k] ? gi[1 + k]->ptr() + static_cast<std::size_t>(c) * nm : nullptr;
              g.b[k] = gi[5 + k] ? gi[5 + k]->ptr() + static_cast<std::size_t>(c) * kPriorWidths[k + 1] : nullptr;
            }
            for (int k = 0; k < 3; ++k) {
              g.f[k] = gi[9 + k] ? gi[9 + k]->ptr() + static_cast<std::size_t>(c) * kPriorWidths[k + 1] : nullptr;
            }
            for (std::size_t i = 0; i < s.plane(); ++i) {
              const std::size_t at = zv.offset(n, c, 0, 0) + i;
              prior_forward(v, zv[at] + 0.5, up);
              prior_forward(v, zv[at] - 0.5, lo);
              const double p = interval_from_logits(up.logit, lo.logit);
              if (p <= kTrainingFloor) continue;
              const double dp = -go[at] / (p * kLn2);
              const double dx = prior_backward(v, up, dp * sigmoid_slope(up.logit), g) +
                                prior_backward(v, lo, -dp * sigmoid_slope(lo.logit), g);
              if (gi[0]) (*gi[0])[at] += dx;
            }
          }
      });
}

Var gaussian_bits(Var v, Var mu, Var sigma) {
  if (!(v.shape() == mu.shape()) || !(v.shape() == sigma.shape())) {
    throw ShapeError("gaussian_bits: values " + v.shape().str() + " mu " +
                     mu.shape().str() + " sigma " + sigma.shape().str());
  }
  const Tensor& vv = v.value();
  const Tensor& mv = mu.value();
  const Tensor& sv = sigma.value();
  Tensor bits(vv.shape());
  for (std::size_t i = 0; i < vv.size(); ++i) {
    const double p = gaussian_interval(vv[i] - mv[i], sv[i]);
    bits[i] = -std::log2(std::max(p, kTrainingFloor));
  }
  return v.tape()->record(
      std::move(bits), {v, mu, sigma},
      [v, mu, sigma](const Tensor& go, std::span<Tensor* const> gi) {
        const Tensor& vv = v.value();
        const Tensor& mv = mu.value();
        const Tensor& sv = sigma.value();
        for (std::size_t i = 0; i < vv.size(); ++i) {
          const double d = vv[i] - mv[i];
          const double s = sv[i];
          const double p = gaussian_interval(d, s);
          if (p <= kTrainingFloor) continue;
          const double a = (d + 0.5) / s;
          const double b = (d - 0.5) / s;
          const double pa = normal_pdf(a);
          const double pb = normal_pdf(b);
          const double dbits = -go[i] / (p * kLn2);
          const double dd = dbits * (pa - pb) / s;
          if (gi[0]) (*gi[0])[i] += dd;
          if (gi[1]) (*gi[1])[i] -= dd;
          if (gi[2]) (*gi[2])[i] += dbits * (b * pb - a * pa) / s;
        }
      });
}

std::vector<double> factorized_pmf(const FactorizedPrior& prior, int channel,
                                   int lo, int hi) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int v = lo; v <= hi; ++v) p.push_back(prior.interval(channel, v));
  return floor_and_normalize(std::move(p));
}

std::vector<double> gaussian_pmf(double sigma, int lo, int hi) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int v = lo; v <= hi; ++v) p.push_back(gaussian_interval(v, sigma));
  return floor_and_normalize(std::move(p));
}

// ------------------------------------------------------------- schedule

ContextSchedule::ContextSchedule(std::vector<int> group_sizes)
    : sizes_(std::move(group_sizes)) {
  if (sizes_.empty()) throw ArgumentError("context schedule needs >= 1 group");
  offsets_.push_back(0);
  for (int g = 0; g < static_cast<int>(sizes_.size()); ++g) {
    if (sizes_[g] <= 0) throw ArgumentError("group sizes must be positive");
    const int begin = offsets_.back();
    const int end = begin + sizes_[g];
    slices_.push_back({g, Parity::kAnchor, begin, end});
    slices_.push_back({g, Parity::kNonAnchor, begin, end});
    offsets_.push_back(end);
  }
}

int ContextSchedule::slice_of(int c, int h, int w) const {
  for (int g = 0; g < num_groups(); ++g) {
    if (c < offsets_[g + 1]) return 2 * g + (is_anchor(h, w) ? 0 : 1);
  }
  throw ArgumentError("channel " + std::to_string(c) + " outside schedule");
}

Tensor ContextSchedule::parity_mask(const Shape& shape, Parity parity) {
  Tensor m(shape, 0.0);
  for (int n = 0; n < shape.n; ++n)
    for (int c = 0; c < shape.c; ++c)
      for (int h = 0; h < shape.h; ++h)
        for (int w = 0; w < shape.w; ++w)
          if (is_anchor(h, w) == (parity == Parity::kAnchor)) m.at(n, c, h, w) = 1.0;
  return m;
}

// -------------------------------------------------------------- context

namespace {

std::string ctx_name(int g, const char* layer) {
  return "ctx.g" + std::to_string(g) + "." + layer;
}

}  // namespace

std::map<std::string, Shape> context_param_shapes(const HFTConfig& config) {
  std::map<std::string, Shape> out;
  const int m2 = 2 * config.latent_channels;
  const int kc = config.context_kernel;
  int offset = 0;
  for (int g = 0; g < static_cast<int>(config.groups.size()); ++g) {
    const int s = config.groups[g];
    out[ctx_name(g, "cb.w")] = Shape{2 * s, s, kc, kc};
    out[ctx_name(g, "cb.b")] = Shape{1, 2 * s, 1, 1};
    out[ctx_name(g, "f0.w")] = Shape{config.context_hidden, m2 + offset + 2 * s, 1, 1};
    out[ctx_name(g, "f0.b")] = Shape{1, config.context_hidden, 1, 1};
    out[ctx_name(g, "f1.w")] = Shape{2 * s, config.context_hidden, 1, 1};
    out[ctx_name(g, "f1.b")] = Shape{1, 2 * s, 1, 1};
    offset += s;
  }
  return out;
}

CondGaussianParams slice_params(Var known, Var hyper_features,
                                const Slice& slice,
                                const ContextSchedule& schedule,
                                const ParamVars& params,
                                const HFTConfig& config) {
  Tape& tape = *known.tape();
  const int g = slice.group;
  const int offset = schedule.group_offset(g);
  const int size = schedule.group_size(g);
  const Shape ks = known.shape();
  const Shape hs = hyper_features.shape();
  if (hs.c != 2 * config.latent_channels || hs.h != ks.h || hs.w != ks.w ||
      hs.n != ks.n) {
    throw ShapeError("context: hyper features " + hs.str() +
                     " do not match latent " + ks.str());
  }
  const int needed = slice.parity == Parity::kAnchor ? offset : offset + size;
  if (ks.c < needed) {
    throw ShapeError("context: known latent " + ks.str() + " lacks the " +
                     std::to_string(needed) + " channels slice needs");
  }
  const auto shapes = context_param_shapes(config);
  auto p = [&](const char* layer) {
    const std::string name = ctx_name(g, layer);
    return param(params, name, shapes.at(name));
  };

  std::vector<Var> parts{hyper_features};
  if (offset > 0) parts.push_back(slice_channels(known, 0, offset));
  if (slice.parity == Parity::kAnchor) {
    parts.push_back(tape.constant(Tensor(Shape{ks.n, 2 * size, ks.h, ks.w}, 0.0)));
  } else {
    Var current = slice_channels(known, offset, offset + size);
    Var anchors = current * tape.constant(ContextSchedule::parity_mask(
                                current.shape(), Parity::kAnchor));
    parts.push_back(conv2d(anchors, p("cb.w"), p("cb.b"), 1,
                           config.context_kernel / 2));
  }
  Var fused = concat_channels(parts);
  Var hidden = leaky_relu(conv2d(fused, p("f0.w"), p("f0.b"), 1, 0));
  Var out = conv2d(hidden, p("f1.w"), p("f1.b"), 1, 0);
  CondGaussianParams r;
  r.mu = slice_channels(out, 0, size);
  r.sigma = add_scalar(softplus(slice_channels(out, size, 2 * size)), kSigmaMin);
  return r;
}

ContextDecoder::ContextDecoder(const HFTConfig& config,
                               const ModelParams& params,
                               Tensor hyper_features)
    : config_(config),
      params_(params),
      schedule_(config.groups),
      hyper_(std::move(hyper_features)) {
  const Shape& hs = hyper_.shape();
  if (hs.c != 2 * config.latent_channels) {
    throw ShapeError("context decoder: hyper features " + hs.str() +
                     " need " + std::to_string(2 * config.latent_channels) +
                     " channels");
  }
  known_ = Tensor(Shape{hs.n, config.latent_channels, hs.h, hs.w}, 0.0);
}

ContextDecoder::SliceTables ContextDecoder::params_for(int slice) const {
  if (slice != next_) {
    throw CausalityError("slice " + std::to_string(slice) +
                         " requested before slice " + std::to_string(next_) +
                         " was decoded");
  }
  const Slice& sl = schedule_.slices()[slice];
  Tape tape;
  ParamVars vars;
  const std::string prefix = "ctx.g" + std::to_string(sl.group) + ".";
  for (const auto& [name, t] : params_.tensors) {
    if (name.starts_with(prefix)) vars.emplace(name, tape.leaf(t, false));
  }
  Var known = tape.constant(known_);
  Var hyper = tape.constant(hyper_);
  const CondGaussianParams p =
      slice_params(known, hyper, sl, schedule_, vars, config_);
  return {p.mu.value(), p.sigma.value()};
}

void ContextDecoder::commit(const Tensor& group_values) {
  if (done()) throw CausalityError("all slices already decoded");
  const Slice& sl = schedule_.slices()[next_];
  const Shape& s = group_values.shape();
  const Shape& ks = known_.shape();
  if (s.n != ks.n || s.c != sl.channel_end - sl.channel_begin || s.h != ks.h ||
      s.w != ks.w) {
    throw ShapeError("context decoder: slice values " + s.str() +
                     " do not match group layout");
  }
  const bool anchor = sl.parity == Parity::kAnchor;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
          if (ContextSchedule::is_anchor(h, w) == anchor)
            known_.at(n, sl.channel_begin + c, h, w) = group_values.at(n, c, h, w);
  ++next_;
}

}  // namespace lhfc
