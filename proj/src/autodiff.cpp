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

#include "mvmt/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>

#include "mvmt/error.hpp"

namespace mvmt {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    fail("operands belong to different tapes");
  }
}

// Flat index into b for every flat index of a, or empty when the shapes are
// identical. Caller has validated broadcastability.
std::vector<std::size_t> broadcast_map(const Shape& a, const Shape& b) {
  if (a == b) return {};
  const std::size_t rank = a.size();
  const std::size_t offset = rank - b.size();
  std::vector<std::size_t> b_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t j = b.size(); j-- > 0;) {
    const std::size_t i = j + offset;
    b_stride[i] = (b[j] == 1 && a[i] != 1) ? 0 : stride;
    stride *= b[j];
  }
  const std::size_t total = shape_size(a);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t b_index = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    map[flat] = b_index;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++counter[axis];
      b_index += b_stride[axis];
      if (counter[axis] < a[axis]) break;
      b_index -= b_stride[axis] * counter[axis];
      counter[axis] = 0;
    }
  }
  return map;
}

struct AxisView {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    fail("axis " + std::to_string(axis) + " out of range for shape " +
         shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Var binary(ElementwiseKind kind, const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (!broadcastable(sa, sb)) {
    fail("shape mismatch: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  auto map = broadcast_map(sa, sb);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(sa);
  const std::size_t n = out.size();
  auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
  switch (kind) {
    case ElementwiseKind::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[bi(i)];
      break;
    case ElementwiseKind::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[bi(i)];
      break;
    case ElementwiseKind::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[bi(i)];
      break;
    case ElementwiseKind::kDiv:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / y[bi(i)];
      break;
    default:
      fail("not a binary elementwise kind");
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [kind, ia, ib, map = std::move(map)](Tape& tape, const Tensor& g) {
        auto bi = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
        const Tensor& x = tape.value_at(ia);
        const Tensor& y = tape.value_at(ib);
        const std::size_t n = g.size();
        if (Tensor* ga = tape.grad_buffer(ia)) {
          switch (kind) {
            case ElementwiseKind::kAdd:
            case ElementwiseKind::kSub:
              for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
              break;
            case ElementwiseKind::kMul:
              for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * y[bi(i)];
              break;
            case ElementwiseKind::kDiv:
              for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] / y[bi(i)];
              break;
            default:
              break;
          }
        }
        if (Tensor* gb = tape.grad_buffer(ib)) {
          switch (kind) {
            case ElementwiseKind::kAdd:
              for (std::size_t i = 0; i < n; ++i) (*gb)[bi(i)] += g[i];
              break;
            case ElementwiseKind::kSub:
              for (std::size_t i = 0; i < n; ++i) (*gb)[bi(i)] -= g[i];
              break;
            case ElementwiseKind::kMul:
              for (std::size_t i = 0; i < n; ++i) (*gb)[bi(i)] += g[i] * x[i];
              break;
            case ElementwiseKind::kDiv:
              for (std::size_t i = 0; i < n; ++i) {
                const double yv = y[bi(i)];
                (*gb)[bi(i)] -= g[i] * x[i] / (yv * yv);
              }
              break;
            default:
              break;
          }
        }
      });
}

Var unary(ElementwiseKind kind, const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  const std::size_t n = x.size();
  switch (kind) {
    case ElementwiseKind::kSqrt:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(x[i]);
      break;
    case ElementwiseKind::kTanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
      break;
    case ElementwiseKind::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case ElementwiseKind::kRelu:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    default:
      fail("not a unary elementwise kind");
  }
  const std::size_t ia = a.id();
  Var result = a.tape().record(std::move(out), {a}, nullptr);
  if (!result.requires_grad()) return result;
  const std::size_t io = result.id();
  a.tape().set_backward(io, [kind, ia, io](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(ia);
    if (!ga) return;
    const Tensor& x = tape.value_at(ia);
    const Tensor& y = tape.value_at(io);
    const std::size_t n = g.size();
    switch (kind) {
      case ElementwiseKind::kSqrt:
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * 0.5 / y[i];
        break;
      case ElementwiseKind::kTanh:
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case ElementwiseKind::kSigmoid:
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case ElementwiseKind::kRelu:
        // Derivative at the kink is 0.
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] > 0.0) (*ga)[i] += g[i];
        }
        break;
      default:
        break;
    }
  });
  return result;
}

}  // namespace

// ---- Var / Tape ------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(*this); }
const Shape& Var::shape() const { return tape_->value(*this).shape(); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  if (param.grad.shape() != param.value.shape()) param.zero_grad();
  nodes_.push_back(Node{param.value, std::nullopt, true, &param});
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(const Var& v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad) return *node.grad;
  return Tensor(node.value.shape());
}

Tensor* Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (!node.grad) node.grad.emplace(node.value.shape());
  return &*node.grad;
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (!in.valid() || &in.tape() != this) fail("operand belongs to a different tape");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), std::nullopt, needs_grad, nullptr});
  const std::size_t id = nodes_.size() - 1;
  if (needs_grad && backward) ops_.push_back(Op{id, std::move(backward)});
  return Var(this, id);
}

void Tape::set_backward(std::size_t output, BackwardFn backward) {
  if (!nodes_[output].requires_grad) return;
  if (!ops_.empty() && ops_.back().output == output) {
    ops_.back().backward = std::move(backward);
  } else {
    ops_.push_back(Op{output, std::move(backward)});
  }
}

void Tape::backward(const Var& loss) {
  if (!loss.valid() || &loss.tape() != this) fail("loss belongs to a different tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) fail("backward requires a scalar loss, got shape " + shape_str(lv.shape()));
  for (Node& node : nodes_) node.grad.reset();
  Tensor* seed = grad_buffer(loss.id());
  if (!seed) return;
  (*seed)[0] = 1.0;
  for (std::size_t i = ops_.size(); i-- > 0;) {
    Op& op = ops_[i];
    if (op.output > loss.id()) continue;
    const Node& out = nodes_[op.output];
    if (!out.grad) continue;
    op.backward(*this, *out.grad);
  }
  for (Node& node : nodes_) {
    if (!node.param || !node.grad) continue;
    Tensor& pg = node.param->grad;
    if (pg.shape() != node.value.shape()) pg = Tensor(node.value.shape());
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += (*node.grad)[i];
  }
}

// ---- elementwise -----------------------------------------------------------

bool broadcastable(const Shape& to, const Shape& from) {
  if (from.size() > to.size()) return false;
  const std::size_t offset = to.size() - from.size();
  for (std::size_t j = 0; j < from.size(); ++j) {
    if (from[j] != 1 && from[j] != to[j + offset]) return false;
  }
  return true;
}

Var elementwise(ElementwiseKind kind, const Var& a, const std::optional<Var>& b) {
  switch (kind) {
    case ElementwiseKind::kAdd:
    case ElementwiseKind::kSub:
    case ElementwiseKind::kMul:
    case ElementwiseKind::kDiv:
      if (!b) fail("binary elementwise op requires two operands");
      return binary(kind, a, *b);
    default:
      if (b) fail("unary elementwise op takes one operand");
      return unary(kind, a);
  }
}

Var add(const Var& a, const Var& b) { return binary(ElementwiseKind::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return binary(ElementwiseKind::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(ElementwiseKind::kMul, a, b); }
Var div(const Var& a, const Var& b) { return binary(ElementwiseKind::kDiv, a, b); }
Var sqrt(const Var& a) { return unary(ElementwiseKind::kSqrt, a); }
Var tanh(const Var& a) { return unary(ElementwiseKind::kTanh, a); }
Var sigmoid(const Var& a) { return unary(ElementwiseKind::kSigmoid, a); }
Var relu(const Var& a) { return unary(ElementwiseKind::kRelu, a); }

Var add_scalar(const Var& a, double c) {
  return binary(ElementwiseKind::kAdd, a, a.tape().constant(Tensor::scalar(c)));
}

Var scale(const Var& a, double c) {
  return binary(ElementwiseKind::kMul, a, a.tape().constant(Tensor::scalar(c)));
}

// ---- reductions ------------------------------------------------------------

Var reduce(ReduceKind kind, const Var& a, std::size_t axis, bool keepdim) {
  const Shape& shape = a.shape();
  const AxisView v = axis_view(shape, axis);
  if (v.len == 0) fail("cannot reduce an empty axis");
  Shape out_shape = shape;
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const Tensor& x = a.value();
  Tensor mean(out_shape);
  const double inv = 1.0 / static_cast<double>(v.len);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t l = 0; l < v.len; ++l) {
      const double* row = x.raw() + (o * v.len + l) * v.inner;
      double* dst = mean.raw() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += row[i];
    }
  }
  for (double& m : mean.data()) m *= inv;
  if (kind == ReduceKind::kMean) {
    const std::size_t ia = a.id();
    return a.tape().record(std::move(mean), {a}, [ia, v, inv](Tape& tape, const Tensor& g) {
      Tensor* ga = tape.grad_buffer(ia);
      if (!ga) return;
      for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = g.raw() + o * v.inner;
        for (std::size_t l = 0; l < v.len; ++l) {
          double* dst = ga->raw() + (o * v.len + l) * v.inner;
          for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i] * inv;
        }
      }
    });
  }
  Tensor var(out_shape);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* mu = mean.raw() + o * v.inner;
    double* dst = var.raw() + o * v.inner;
    for (std::size_t l = 0; l < v.len; ++l) {
      const double* row = x.raw() + (o * v.len + l) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        const double d = row[i] - mu[i];
        dst[i] += d * d;
      }
    }
  }
  for (double& s : var.data()) s *= inv;
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(var), {a},
      [ia, v, inv, mean = std::move(mean)](Tape& tape, const Tensor& g) {
        Tensor* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor& x = tape.value_at(ia);
        for (std::size_t o = 0; o < v.outer; ++o) {
          const double* mu = mean.raw() + o * v.inner;
          const double* src = g.raw() + o * v.inner;
          for (std::size_t l = 0; l < v.len; ++l) {
            const std::size_t base = (o * v.len + l) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) {
              (*ga)[base + i] += src[i] * 2.0 * inv * (x[base + i] - mu[i]);
            }
          }
        }
      });
}

Var sum_all(const Var& a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(total), {a}, [ia](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(ia);
    if (!ga) return;
    for (double& x : ga->data()) x += g[0];
  });
}

Var mean_all(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) fail("mean of an empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

// ---- structure -------------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(ia);
    if (!ga) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_channels needs at least one part");
  const Shape& first = parts.front().shape();
  if (first.empty()) fail("concat_channels needs rank >= 1");
  Shape lead(first.begin(), first.end() - 1);
  std::size_t channels = 0;
  std::vector<std::size_t> widths;
  std::vector<Var> inputs;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      fail("concat_channels shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    channels += s.back();
    inputs.push_back(p);
  }
  Shape out_shape = lead;
  out_shape.push_back(channels);
  Tensor out(out_shape);
  const std::size_t rows = shape_size(lead);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.raw() + r * widths[p], widths[p], out.raw() + r * channels + col);
    }
    col += widths[p];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts.front().tape().record(
      std::move(out), inputs,
      [ids, widths, rows, channels](Tape& tape, const Tensor& g) {
        std::size_t col = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          if (Tensor* gp = tape.grad_buffer(ids[p])) {
            for (std::size_t r = 0; r < rows; ++r) {
              const double* src = g.raw() + r * channels + col;
              double* dst = gp->raw() + r * widths[p];
              for (std::size_t c = 0; c < widths[p]; ++c) dst[c] += src[c];
            }
          }
          col += widths[p];
        }
      });
}

Var slice_channels(const Var& a, std::size_t begin, std::size_t count) {
  const Shape& sa = a.shape();
  if (sa.empty()) fail("slice_channels needs rank >= 1");
  const std::size_t channels = sa.back();
  if (count == 0 || begin + count > channels) {
    fail("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") out of range for " +
         std::to_string(channels) + " channels");
  }
  Shape out_shape = sa;
  out_shape.back() = count;
  Tensor out(out_shape);
  const std::size_t rows = a.value().size() / channels;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().raw() + r * channels + begin, count, out.raw() + r * count);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, channels, begin, count](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(ia);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = g.raw() + r * count;
      double* dst = ga->raw() + r * channels + begin;
      for (std::size_t c = 0; c < count; ++c) dst[c] += src[c];
    }
  });
}

Var select(const Var& a, std::size_t axis, std::size_t index) {
  const Shape& shape = a.shape();
  const AxisView v = axis_view(shape, axis);
  if (index >= v.len) {
    fail("select index " + std::to_string(index) + " out of range for axis of length " +
         std::to_string(v.len));
  }
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(x.raw() + (o * v.len + index) * v.inner, v.inner, out.raw() + o * v.inner);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, v, index](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(ia);
    if (!ga) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      double* dst = ga->raw() + (o * v.len + index) * v.inner;
      const double* src = g.raw() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  });
}

// ---- dense layers ----------------------------------------------------------

Var linear(const Var& a, const Var& weight, const Var& bias) {
  require_same_tape(a, weight);
  require_same_tape(a, bias);
  const Shape& sa = a.shape();
  const Shape& sw = weight.shape();
  if (sa.empty() || sw.size() != 2 || sa.back() != sw[0]) {
    fail("linear dimension mismatch: input " + shape_str(sa) + ", weight " + shape_str(sw));
  }
  if (bias.shape() != Shape{sw[1]}) {
    fail("linear bias shape " + shape_str(bias.shape()) + " != (" + std::to_string(sw[1]) + ")");
  }
  const std::size_t d_in = sw[0];
  const std::size_t d_out = sw[1];
  const std::size_t rows = a.value().size() / std::max<std::size_t>(d_in, 1);
  Shape out_shape = sa;
  out_shape.back() = d_out;
  Tensor out(out_shape);
  {
    ConstMatMap x(a.value().raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_in));
    ConstMatMap w(weight.value().raw(), static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(d_out));
    Eigen::Map<const Eigen::RowVectorXd> b(bias.value().raw(), static_cast<Eigen::Index>(d_out));
    MatMap y(out.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_out));
    y.noalias() = x * w;
    y.rowwise() += b;
  }
  const std::size_t ia = a.id(), iw = weight.id(), ib = bias.id();
  return a.tape().record(
      std::move(out), {a, weight, bias},
      [ia, iw, ib, rows, d_in, d_out](Tape& tape, const Tensor& g) {
        const auto r = static_cast<Eigen::Index>(rows);
        const auto di = static_cast<Eigen::Index>(d_in);
        const auto dout = static_cast<Eigen::Index>(d_out);
        ConstMatMap gy(g.raw(), r, dout);
        if (Tensor* ga = tape.grad_buffer(ia)) {
          ConstMatMap w(tape.value_at(iw).raw(), di, dout);
          MatMap gx(ga->raw(), r, di);
          gx.noalias() += gy * w.transpose();
        }
        if (Tensor* gw = tape.grad_buffer(iw)) {
          ConstMatMap x(tape.value_at(ia).raw(), r, di);
          MatMap gwm(gw->raw(), di, dout);
          gwm.noalias() += x.transpose() * gy;
        }
        if (Tensor* gb = tape.grad_buffer(ib)) {
          Eigen::Map<Eigen::RowVectorXd> gbm(gb->raw(), dout);
          gbm += gy.colwise().sum();
        }
      });
}

Var causal_conv(const Var& x, const Var& weight, const Var& bias, std::size_t dilation,
                Padding padding) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  if (dilation == 0) fail("causal_conv dilation must be positive");
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() < 2) fail("causal_conv input needs shape [..., T, c_in], got " + shape_str(sx));
  if (sw.size() != 3 || sw[1] != sx.back() || sw[0] == 0) {
    fail("causal_conv weight " + shape_str(sw) + " does not fit input " + shape_str(sx));
  }
  if (bias.shape() != Shape{sw[2]}) {
    fail("causal_conv bias shape " + shape_str(bias.shape()) + " != (" + std::to_string(sw[2]) + ")");
  }
  const std::size_t taps = sw[0];
  const std::size_t c_in = sw[1];
  const std::size_t c_out = sw[2];
  const std::size_t steps = sx[sx.size() - 2];
  const std::size_t series = x.value().size() / std::max<std::size_t>(steps * c_in, 1);
  const std::size_t width = taps * c_in;

  // Row (s, t) of `cols` holds [x[s, t - d*0], x[s, t - d*1], ...]: the
  // receptive taps of output step t, with left padding resolved.
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(series * steps),
                             static_cast<Eigen::Index>(width));
  const double* xs = x.value().raw();
  for (std::size_t s = 0; s < series; ++s) {
    for (std::size_t t = 0; t < steps; ++t) {
      double* dst = cols.data() + (s * steps + t) * width;
      for (std::size_t i = 0; i < taps; ++i) {
        const std::size_t back = dilation * i;
        std::size_t src;
        if (back <= t) {
          src = t - back;
        } else if (padding == Padding::kReplicate) {
          src = 0;
        } else {
          continue;
        }
        std::copy_n(xs + (s * steps + src) * c_in, c_in, dst + i * c_in);
      }
    }
  }
  Shape out_shape = sx;
  out_shape.back() = c_out;
  Tensor out(out_shape);
  {
    ConstMatMap w(weight.value().raw(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(c_out));
    Eigen::Map<const Eigen::RowVectorXd> b(bias.value().raw(), static_cast<Eigen::Index>(c_out));
    MatMap y(out.raw(), static_cast<Eigen::Index>(series * steps), static_cast<Eigen::Index>(c_out));
    y.noalias() = cols * w;
    y.rowwise() += b;
  }
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, weight, bias},
      [ix, iw, ib, series, steps, taps, c_in, c_out, width, dilation, padding,
       cols = std::move(cols)](Tape& tape, const Tensor& g) {
        const auto rows = static_cast<Eigen::Index>(series * steps);
        ConstMatMap gy(g.raw(), rows, static_cast<Eigen::Index>(c_out));
        if (Tensor* gw = tape.grad_buffer(iw)) {
          MatMap gwm(gw->raw(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(c_out));
          gwm.noalias() += cols.transpose() * gy;
        }
        if (Tensor* gb = tape.grad_buffer(ib)) {
          Eigen::Map<Eigen::RowVectorXd> gbm(gb->raw(), static_cast<Eigen::Index>(c_out));
          gbm += gy.colwise().sum();
        }
        if (Tensor* gx = tape.grad_buffer(ix)) {
          ConstMatMap w(tape.value_at(iw).raw(), static_cast<Eigen::Index>(width),
                        static_cast<Eigen::Index>(c_out));
          RowMat gcols = gy * w.transpose();
          for (std::size_t s = 0; s < series; ++s) {
            for (std::size_t t = 0; t < steps; ++t) {
              const double* src = gcols.data() + (s * steps + t) * width;
              for (std::size_t i = 0; i < taps; ++i) {
                const std::size_t back = dilation * i;
                std::size_t dst_t;
                if (back <= t) {
                  dst_t = t - back;
                } else if (padding == Padding::kReplicate) {
                  dst_t = 0;
                } else {
                  continue;
                }
                double* dst = gx->raw() + (s * steps + dst_t) * c_in;
                for (std::size_t c = 0; c < c_in; ++c) dst[c] += src[i * c_in + c];
              }
            }
          }
        }
      });
}

Var mse_loss(const Var& pred, const Var& target) {
  if (pred.shape() != target.shape()) {
    fail("mse_loss shape mismatch: " + shape_str(pred.shape()) + " vs " +
         shape_str(target.shape()));
  }
  Var diff = sub(pred, target);
  return mean_all(mul(diff, diff));
}

}  // namespace mvmt
