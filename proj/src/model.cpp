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

#include "mvmt/model.hpp"

#include <cmath>
#include <random>

#include "mvmt/error.hpp"
#include "mvmt/random.hpp"

namespace mvmt {

Variant parse_variant(const std::string& id) {
  if (id.size() == 1) {
    switch (id[0]) {
      case 'a': case 'A': return Variant::kA;
      case 'b': case 'B': return Variant::kB;
      case 'c': case 'C': return Variant::kC;
      case 'd': case 'D': return Variant::kD;
      case 'e': case 'E': return Variant::kE;
      case 'f': case 'F': return Variant::kF;
      default: break;
    }
  }
  fail("unknown variant '" + id + "' (expected one of a,b,c,d,e,f)");
}

char variant_id(Variant v) {
  switch (v) {
    case Variant::kA: return 'a';
    case Variant::kB: return 'b';
    case Variant::kC: return 'c';
    case Variant::kD: return 'd';
    case Variant::kE: return 'e';
    case Variant::kF: return 'f';
  }
  return '?';
}

BranchSet branches_for(Variant v) {
  switch (v) {
    case Variant::kA: return {true, true, true, true};
    case Variant::kB: return {false, true, true, true};
    case Variant::kC: return {true, true, false, true};
    case Variant::kD: return {true, true, true, false};
    case Variant::kE: return {true, false, false, true};
    case Variant::kF: return {true, false, false, false};
  }
  fail("invalid variant");
}

std::size_t ModelConfig::receptive_field() const {
  std::size_t span = 0;
  for (std::size_t l = 0; l < layers; ++l) span += dilation(l);
  return 1 + (kernel - 1) * span;
}

void ModelConfig::validate() const {
  if (layers == 0) fail("model needs at least one layer");
  if (layers > 30) fail("too many layers for the 2^l dilation schedule");
  if (kernel == 0) fail("kernel size must be at least 1");
  if (hidden == 0) fail("hidden channels must be positive");
  if (input_length == 0) fail("input length must be positive");
  if (output_length == 0) fail("output length must be positive");
  if (!(epsilon >= 0.0)) fail("epsilon must be non-negative");
}

namespace {

bool has_affine(Variant v) {
  const BranchSet b = branches_for(v);
  return b.spatial && b.spatial_affine;
}

std::string block_name(std::size_t layer, const char* part) {
  return "block" + std::to_string(layer + 1) + "." + part;
}

}  // namespace

Model::Model(const ModelConfig& config, std::size_t num_variables, std::uint64_t seed)
    : config_(config), num_variables_(num_variables) {
  config_.validate();
  if (num_variables == 0) fail("model needs at least one variable");
  Rng rng(derive_seed(seed, "init"));
  const std::size_t dz = config_.hidden;
  const std::size_t c = config_.mvmt_channels();
  const std::size_t k = config_.kernel;

  auto uniform = [&rng](Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (double& x : t.data()) x = dist(rng);
    return t;
  };

  params_.emplace_back("input.weight", uniform({1, dz}, 1));
  params_.emplace_back("input.bias", Tensor({dz}));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    if (has_affine(config_.variant)) {
      std::uniform_real_distribution<double> jitter(-0.01, 0.01);
      Tensor w({num_variables, dz});
      for (double& x : w.data()) x = 1.0 + jitter(rng);
      params_.emplace_back(block_name(l, "affine.w"), std::move(w));
      params_.emplace_back(block_name(l, "affine.b"), Tensor({num_variables, dz}));
    }
    params_.emplace_back(block_name(l, "filter.weight"), uniform({k, c, dz}, k * c));
    params_.emplace_back(block_name(l, "filter.bias"), Tensor({dz}));
    params_.emplace_back(block_name(l, "gate.weight"), uniform({k, c, dz}, k * c));
    params_.emplace_back(block_name(l, "gate.bias"), Tensor({dz}));
    params_.emplace_back(block_name(l, "proj.weight"), uniform({dz, dz}, dz));
    params_.emplace_back(block_name(l, "proj.bias"), Tensor({dz}));
  }
  params_.emplace_back("head.weight", uniform({dz, config_.output_length}, dz));
  params_.emplace_back("head.bias", Tensor({config_.output_length}));
}

std::size_t Model::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  fail("model has no parameter '" + name + "'");
}

Parameter& Model::parameter(const std::string& name) { return params_[index_of(name)]; }
const Parameter& Model::parameter(const std::string& name) const {
  return params_[index_of(name)];
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter& p : params_) total += p.value.size();
  return total;
}

std::size_t Model::expected_parameter_count(const ModelConfig& config, std::size_t num_variables) {
  const std::size_t dz = config.hidden;
  const std::size_t c = config.mvmt_channels();
  const std::size_t affine = has_affine(config.variant) ? 2 * num_variables * dz : 0;
  const std::size_t block = affine + 2 * (config.kernel * c * dz + dz) + dz * dz + dz;
  return 2 * dz + config.layers * block + dz * config.output_length + config.output_length;
}

void Model::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

Var residual_block(const Var& z, const ResidualBlockVars& params, const ModelConfig& config,
                   std::size_t layer, MvmtOutput* branches_out) {
  MvmtOutput m = mvmt_block(z, branches_for(config.variant), params.affine, config.epsilon);
  const std::size_t d = config.dilation(layer);
  // Filter and gate share one convolution over stacked output channels.
  Var fg = causal_conv(m.output, concat_channels({params.filter_weight, params.gate_weight}),
                       concat_channels({params.filter_bias, params.gate_bias}), d, config.padding);
  Var f = slice_channels(fg, 0, config.hidden);
  Var g = slice_channels(fg, config.hidden, config.hidden);
  Var gated = mul(tanh(f), sigmoid(g));
  Var out = add(z, linear(gated, params.proj_weight, params.proj_bias));
  if (branches_out) *branches_out = std::move(m);
  return out;
}

template <class Bind>
Var Model::run(Tape& tape, const Tensor& x, ActivationMap* activations, Bind&& bind) const {
  if (x.rank() != 3 || x.dim(1) != num_variables_ || x.dim(2) != config_.input_length) {
    fail("model expects input [B, " + std::to_string(num_variables_) + ", " +
         std::to_string(config_.input_length) + "], got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  if (activations) (*activations)["input"] = x;
  std::size_t next = 0;
  auto take = [&]() { return bind(next++); };

  Var input = tape.constant(x.reshaped({batch, num_variables_, config_.input_length, 1}));
  Var in_w = take();
  Var in_b = take();
  Var z = linear(input, in_w, in_b);
  const bool affine = has_affine(config_.variant);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    ResidualBlockVars p;
    if (affine) {
      Var w = take();
      Var b = take();
      p.affine = AffineVars{w, b};
    }
    p.filter_weight = take();
    p.filter_bias = take();
    p.gate_weight = take();
    p.gate_bias = take();
    p.proj_weight = take();
    p.proj_bias = take();
    MvmtOutput branches;
    z = residual_block(z, p, config_, l, activations ? &branches : nullptr);
    if (activations) {
      const std::string prefix = "block_" + std::to_string(l + 1) + ".";
      if (branches.original) (*activations)[prefix + "original"] = branches.original->value();
      if (branches.spatial) (*activations)[prefix + "spatial"] = branches.spatial->value();
      if (branches.temporal) (*activations)[prefix + "temporal"] = branches.temporal->value();
      (*activations)[prefix + "output"] = z.value();
    }
  }
  Var pooled = temporal_pool(z);
  if (activations) (*activations)["pooled"] = pooled.value();
  Var head_w = take();
  Var head_b = take();
  return linear(pooled, head_w, head_b);
}

Var Model::forward(Tape& tape, const Tensor& x) {
  return run(tape, x, nullptr, [&](std::size_t i) { return tape.parameter(params_[i]); });
}

Var Model::forward_frozen(Tape& tape, const Tensor& x, ActivationMap* activations) const {
  return run(tape, x, activations, [&](std::size_t i) { return tape.constant(params_[i].value); });
}

Tensor Model::forecast(const Tensor& x) const {
  Tape tape;
  if (x.rank() == 2) {
    Tensor batched = x.reshaped({1, x.dim(0), x.dim(1)});
    Tensor y = forward_frozen(tape, batched).value();
    return std::move(y).reshaped({num_variables_, config_.output_length});
  }
  return forward_frozen(tape, x).value();
}

Tensor causal_conv(const Tensor& z, const Tensor& filter, std::size_t dilation, Padding padding) {
  if (z.rank() != 2) fail("causal_conv expects a [T, c_in] signal, got " + shape_str(z.shape()));
  Tape tape;
  Var x = tape.constant(z);
  Tensor weight = filter;
  if (filter.rank() == 1) weight = filter.reshaped({filter.size(), 1, 1});
  Var w = tape.constant(weight);
  Var b = tape.constant(Tensor({weight.rank() == 3 ? weight.dim(2) : 1}));
  return mvmt::causal_conv(x, w, b, dilation, padding).value();
}

Var temporal_pool(const Var& z) {
  const Shape& s = z.shape();
  if (s.size() < 2) fail("temporal_pool expects [..., T, d], got " + shape_str(s));
  const std::size_t axis = s.size() - 2;
  if (s[axis] == 0) fail("temporal_pool over an empty time axis");
  return select(z, axis, s[axis] - 1);
}

}  // namespace mvmt
