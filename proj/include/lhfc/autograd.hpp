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

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "lhfc/tensor.hpp"

namespace lhfc {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Backward closure of a recorded op. `grad_inputs[i]` is null when input i
// does not require a gradient; otherwise gradients are accumulated into it.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_inputs)>;

// Gradients produced by Tape::backward, indexed by Var.
class Gradients {
 public:
  // Gradient of `v`; an all-zero tensor when v is not on any path to the
  // loss.
  Tensor of(Var v) const;
  bool reached(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
};

// Reverse-mode tape. Operations are appended in evaluation order and replayed
// in exact reverse order by backward().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op. The backward closure is dropped when no input requires a
  // gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };
  void check_owner(Var v) const;

  std::deque<Node> nodes_;
};

// Differentiable ops. Operands must live on the same tape; no broadcasting
// except the explicit scalar variants.
Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
Var conv2d_transpose(Var x, Var weight, Var bias, int stride, int pad,
                     int out_pad);
Var leaky_relu(Var x, double slope = 0.01);
Var softplus(Var x);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var scale(Var x, double s);
Var add_scalar(Var x, double s);
Var square(Var x);
Var sum(Var x);
Var mean(Var x);
Var slice_channels(Var x, int begin, int end);
Var concat_channels(std::span<const Var> parts);
Var crop(Var x, int h, int w);
// Forward: round half away from zero. Backward: identity.
Var round_ste(Var x);

}  // namespace lhfc
