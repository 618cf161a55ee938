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

#include "lhfc/autograd.hpp"

#include <cmath>
#include <string>

#include "lhfc/error.hpp"

namespace lhfc {

const Tensor& Var::value() const {
  if (!tape_) throw ArgumentError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const {
  return tape_ != nullptr && tape_->requires_grad(*this);
}

Tensor Gradients::of(Var v) const {
  const auto i = static_cast<std::size_t>(v.id());
  if (i < grads_.size() && grads_[i].size() != 0) return grads_[i];
  return Tensor(v.shape(), 0.0);
}

bool Gradients::reached(Var v) const {
  const auto i = static_cast<std::size_t>(v.id());
  return i < grads_.size() && grads_[i].size() != 0;
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ < 0 ||
      static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw ArgumentError("Var does not belong to this tape");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owner(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const {
  check_owner(v);
  return nodes_[v.id_].value;
}

bool Tape::requires_grad(Var v) const {
  check_owner(v);
  return nodes_[v.id_].requires_grad;
}

Gradients Tape::backward(Var loss) const {
  check_owner(loss);
  if (nodes_[loss.id_].value.size() != 1) {
    throw ArgumentError("backward: loss must be a scalar, got shape " +
                        nodes_[loss.id_].value.shape().str());
  }
  Gradients g;
  g.grads_.resize(nodes_.size());
  if (!nodes_[loss.id_].requires_grad) return g;
  g.grads_[loss.id_] = Tensor(nodes_[loss.id_].value.shape(), 1.0);

  std::vector<Tensor*> slots;
  for (int i = loss.id_; i >= 0; --i) {
    const Node& node = nodes_[i];
    if (!node.backward || g.grads_[i].size() == 0) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const int in = node.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      if (g.grads_[in].size() == 0) {
        g.grads_[in] = Tensor(nodes_[in].value.shape(), 0.0);
      }
      slots[j] = &g.grads_[in];
    }
    node.backward(g.grads_[i], slots);
  }
  return g;
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ArgumentError("operands live on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape " + a.shape().str() +
                     " vs " + b.shape().str());
  }
}

std::span<const double> bias_span(Var b) {
  if (!b.valid()) return {};
  return b.value().data();
}

// Elementwise unary op with derivative given as a function of (x, y).
template <class F, class D>
Var unary(Var x, F f, D df) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return x.tape()->record(
      std::move(y), {x},
      [x, df](const Tensor& go, std::span<Tensor* const> gi) {
        const Tensor& xv = x.value();
        const Tensor& g0 = go;
        Tensor& dx = *gi[0];
        for (std::size_t i = 0; i < xv.size(); ++i) dx[i] += g0[i] * df(xv[i]);
      });
}

}  // namespace

Var conv2d(Var x, Var weight, Var bias, int stride, int pad) {
  Tape& tape = same_tape(x, weight);
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) {
    same_tape(x, bias);
    inputs.push_back(bias);
  }
  const kernels::ConvGeometry g{stride, pad};
  Tensor out = kernels::conv2d(x.value(), weight.value(), bias_span(bias), g);
  return tape.record(
      std::move(out), inputs,
      [x, weight, g](const Tensor& go, std::span<Tensor* const> gi) {
        if (gi[0]) kernels::conv2d_backward_input(go, weight.value(), g, *gi[0]);
        if (gi[1]) kernels::conv2d_backward_weight(x.value(), go, g, *gi[1]);
        if (gi.size() > 2 && gi[2]) {
          Tensor& db = *gi[2];
          const Shape& s = go.shape();
          for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
              const double* p = go.ptr() + go.offset(n, c, 0, 0);
              double acc = 0.0;
              for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
              db[c] += acc;
            }
        }
      });
}

Var conv2d_transpose(Var x, Var weight, Var bias, int stride, int pad,
                     int out_pad) {
  Tape& tape = same_tape(x, weight);
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) {
    same_tape(x, bias);
    inputs.push_back(bias);
  }
  const kernels::ConvGeometry g{stride, pad};
  Tensor out = kernels::conv2d_transpose(x.value(), weight.value(),
                                         bias_span(bias), g, out_pad);
  return tape.record(
      std::move(out), inputs,
      [x, weight, g](const Tensor& go, std::span<Tensor* const> gi) {
        // A transposed convolution is the input-adjoint of conv2d, so its
        // input gradient is a forward conv2d and its weight gradient swaps
        // the roles of input and output.
        if (gi[0]) {
          Tensor d = kernels::conv2d(go, weight.value(), {}, g);
          Tensor& dx = *gi[0];
          for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
        }
        if (gi[1]) kernels::conv2d_backward_weight(go, x.value(), g, *gi[1]);
        if (gi.size() > 2 && gi[2]) {
          Tensor& db = *gi[2];
          const Shape& s = go.shape();
          for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
              const double* p = go.ptr() + go.offset(n, c, 0, 0);
              double acc = 0.0;
              for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
              db[c] += acc;
            }
        }
      });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var softplus(Var x) {
  return unary(
      x,
      [](double v) {
        return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var operator+(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.record(std::move(y), {a, b},
                     [](const Tensor& go, std::span<Tensor* const> gi) {
                       for (int j = 0; j < 2; ++j) {
                         if (!gi[j]) continue;
                         Tensor& d = *gi[j];
                         for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i];
                       }
                     });
}

Var operator-(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return tape.record(std::move(y), {a, b},
                     [](const Tensor& go, std::span<Tensor* const> gi) {
                       if (gi[0]) {
                         Tensor& d = *gi[0];
                         for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i];
                       }
                       if (gi[1]) {
                         Tensor& d = *gi[1];
                         for (std::size_t i = 0; i < go.size(); ++i) d[i] -= go[i];
                       }
                     });
}

Var operator*(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return tape.record(std::move(y), {a, b},
                     [a, b](const Tensor& go, std::span<Tensor* const> gi) {
                       if (gi[0]) {
                         const Tensor& bv = b.value();
                         Tensor& d = *gi[0];
                         for (std::size_t i = 0; i < go.size(); ++i)
                           d[i] += go[i] * bv[i];
                       }
                       if (gi[1]) {
                         const Tensor& av = a.value();
                         Tensor& d = *gi[1];
                         for (std::size_t i = 0; i < go.size(); ++i)
                           d[i] += go[i] * av[i];
                       }
                     });
}

Var scale(Var x, double s) {
  return unary(x, [s](double v) { return s * v; }, [s](double) { return s; });
}

Var add_scalar(Var x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double) { return 1.0; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; },
               [](double v) { return 2.0 * v; });
}

Var sum(Var x) {
  Tensor y(Shape{1, 1, 1, 1}, sum(x.value()));
  return x.tape()->record(std::move(y), {x},
                          [](const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& d = *gi[0];
                            for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[0];
                          });
}

Var mean(Var x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var slice_channels(Var x, int begin, int end) {
  const Shape s = x.shape();
  if (begin < 0 || end > s.c || begin >= end) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of range for " + s.str());
  }
  const Tensor& xv = x.value();
  Tensor y(Shape{s.n, end - begin, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = begin; c < end; ++c)
      std::copy_n(xv.ptr() + xv.offset(n, c, 0, 0), s.plane(),
                  y.ptr() + y.offset(n, c - begin, 0, 0));
  return x.tape()->record(
      std::move(y), {x},
      [begin, end, s](const Tensor& go, std::span<Tensor* const> gi) {
        Tensor& d = *gi[0];
        for (int n = 0; n < s.n; ++n)
          for (int c = begin; c < end; ++c) {
            const double* src = go.ptr() + go.offset(n, c - begin, 0, 0);
            double* dst = d.ptr() + d.offset(n, c, 0, 0);
            for (std::size_t i = 0; i < s.plane(); ++i) dst[i] += src[i];
          }
      });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
  Shape s = parts[0].shape();
  int channels = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    const Shape& ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_channels: " + ps.str() + " vs " + s.str());
    }
    channels += ps.c;
  }
  s.c = channels;
  Tensor y(s);
  std::vector<int> starts;
  int at = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (int n = 0; n < s.n; ++n)
      std::copy_n(pv.ptr() + pv.offset(n, 0, 0, 0), pv.shape().c * s.plane(),
                  y.ptr() + y.offset(n, at, 0, 0));
    starts.push_back(at);
    at += pv.shape().c;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(
      std::move(y), inputs,
      [starts, s](const Tensor& go, std::span<Tensor* const> gi) {
        for (std::size_t j = 0; j < gi.size(); ++j) {
          if (!gi[j]) continue;
          Tensor& d = *gi[j];
          const int pc = d.shape().c;
          for (int n = 0; n < s.n; ++n) {
            const double* src = go.ptr() + go.offset(n, starts[j], 0, 0);
            double* dst = d.ptr() + d.offset(n, 0, 0, 0);
            for (std::size_t i = 0; i < pc * s.plane(); ++i) dst[i] += src[i];
          }
        }
      });
}

Var crop(Var x, int h, int w) {
  const Shape s = x.shape();
  if (h <= 0 || w <= 0 || h > s.h || w > s.w) {
    throw ShapeError("crop to " + std::to_string(h) + "x" + std::to_string(w) +
                     " invalid for " + s.str());
  }
  if (h == s.h && w == s.w) return x;
  const Tensor& xv = x.value();
  Tensor y(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int r = 0; r < h; ++r)
        std::copy_n(xv.ptr() + xv.offset(n, c, r, 0), w,
                    y.ptr() + y.offset(n, c, r, 0));
  return x.tape()->record(
      std::move(y), {x},
      [h, w, s](const Tensor& go, std::span<Tensor* const> gi) {
        Tensor& d = *gi[0];
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c)
            for (int r = 0; r < h; ++r)
              for (int q = 0; q < w; ++q) d.at(n, c, r, q) += go.at(n, c, r, q);
      });
}

Var round_ste(Var x) {
  return unary(x, [](double v) { return std::round(v); },
               [](double) { return 1.0; });
}

}  // namespace lhfc
