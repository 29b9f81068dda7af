// Copyright 2026 The MVMT Authors.
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

// Define-by-run reverse-mode differentiation over Tensor values.
//
// A Tape owns every intermediate value of one forward pass. Ops append a node
// and, when any input requires a gradient, a backward rule. Tape::backward
// walks the rules once in reverse recording order, accumulating additively
// into input gradients. A tape is confined to a single thread.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvmt/tensor.hpp"

namespace mvmt {

// A named trainable tensor owned by a model. Tape::parameter binds it as a
// leaf; backward adds dLoss/dValue into `grad`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const;
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient of the op's output.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var parameter(Parameter& param);

  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  // Gradient of the last backward() target w.r.t. v; zeros if none reached it.
  Tensor grad(const Var& v) const;

  // Seeds d(loss)/d(loss)=1 and runs every recorded rule in reverse. Bound
  // parameters receive their gradient additively.
  void backward(const Var& loss);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t op_count() const { return ops_.size(); }

  // Op-author interface.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);
  // Attaches the rule for an output recorded without one.
  void set_backward(std::size_t output, BackwardFn backward);
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  // Gradient buffer for accumulation; allocated on first use. Returns nullptr
  // for nodes that do not require a gradient.
  Tensor* grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };
  struct Op {
    std::size_t output;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::vector<Op> ops_;
};

// ---- elementwise -----------------------------------------------------------

enum class ElementwiseKind { kAdd, kSub, kMul, kDiv, kSqrt, kTanh, kSigmoid, kRelu };

// Binary kinds broadcast `b` into a's shape: b's dimensions are right-aligned
// against a's and each must be 1 or equal. The output always has a's shape.
// Division applies no epsilon; callers guard denominators.
Var elementwise(ElementwiseKind kind, const Var& a,
                const std::optional<Var>& b = std::nullopt);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var add_scalar(const Var& a, double c);
Var scale(const Var& a, double c);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

bool broadcastable(const Shape& to, const Shape& from);

// ---- reductions ------------------------------------------------------------

enum class ReduceKind { kMean, kVar };

// Reduces one axis. kVar is the biased (divide-by-count) variance. With
// keepdim the reduced axis stays as size 1.
Var reduce(ReduceKind kind, const Var& a, std::size_t axis, bool keepdim = false);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// ---- structure -------------------------------------------------------------

Var reshape(const Var& a, Shape shape);
// Concatenates along the trailing (channel) axis.
Var concat_channels(const std::vector<Var>& parts);
// Channels [begin, begin + count) of the trailing axis.
Var slice_channels(const Var& a, std::size_t begin, std::size_t count);
// Selects one index along `axis`, dropping it.
Var select(const Var& a, std::size_t axis, std::size_t index);

// ---- dense layers ----------------------------------------------------------

// a[..., d_in] * weight[d_in, d_out] + bias[d_out].
Var linear(const Var& a, const Var& weight, const Var& bias);

enum class Padding { kZero, kReplicate };

// Dilated causal convolution along the second-to-last axis.
//   x:      [..., T, c_in]
//   weight: [k, c_in, c_out]   (tap i reads time t - dilation*i)
//   bias:   [c_out]
// Left padding of (k-1)*dilation keeps the output length at T.
Var causal_conv(const Var& x, const Var& weight, const Var& bias,
                std::size_t dilation, Padding padding = Padding::kZero);

// mean((pred - target)^2) over all elements.
Var mse_loss(const Var& pred, const Var& target);

}  // namespace mvmt
