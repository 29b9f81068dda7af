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

// Wavenet-style forecaster with an MVMT block in every residual block.
//
//   X [B, N, T_in]
//     -> 1x1 input projection to d_z channels
//     -> L residual blocks:  z + proj( tanh(conv_f(m)) * sigmoid(conv_g(m)) ),
//        m = mvmt(z), conv dilation 2^l
//     -> last time slot [B, N, d_z]
//     -> shared linear head to [B, N, T_out]

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvmt/autodiff.hpp"
#include "mvmt/task.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

// Ablation variants of the MVMT block:
//   a  original + spatial(norm+affine) + temporal
//   b  spatial(norm+affine) + temporal
//   c  original + spatial(norm) + temporal
//   d  original + spatial(norm+affine)
//   e  original + temporal
//   f  original only (plain gated Wavenet)
enum class Variant { kA, kB, kC, kD, kE, kF };

Variant parse_variant(const std::string& id);
char variant_id(Variant v);
BranchSet branches_for(Variant v);

struct ModelConfig {
  std::size_t layers = 4;
  std::size_t kernel = 2;
  std::size_t hidden = 16;  // d_z
  std::size_t input_length = 16;
  std::size_t output_length = 3;
  Variant variant = Variant::kA;
  Padding padding = Padding::kZero;
  double epsilon = 1e-5;

  std::size_t dilation(std::size_t layer) const { return std::size_t{1} << layer; }
  // 1 + (k - 1) * sum_l 2^l
  std::size_t receptive_field() const;
  // Channels entering the gated convolutions.
  std::size_t mvmt_channels() const { return branches_for(variant).arity() * hidden; }
  void validate() const;
};

// Activations keyed by stage name: "input", "block_<l>.original",
// "block_<l>.spatial", "block_<l>.temporal" (l is 1-based), "pooled".
using ActivationMap = std::map<std::string, Tensor>;

class Model {
 public:
  Model(const ModelConfig& config, std::size_t num_variables, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t num_variables() const { return num_variables_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;

  std::size_t parameter_count() const;
  static std::size_t expected_parameter_count(const ModelConfig& config, std::size_t num_variables);

  // x: [B, N, T_in] -> [B, N, T_out]. Parameters are bound as trainable leaves.
  Var forward(Tape& tape, const Tensor& x);
  // Same graph with parameters as constants; optionally records activations.
  Var forward_frozen(Tape& tape, const Tensor& x, ActivationMap* activations = nullptr) const;

  // [N, T_in] -> [N, T_out], or batched [B, N, T_in] -> [B, N, T_out].
  Tensor forecast(const Tensor& x) const;

  void zero_grad();

 private:
  template <class Bind>
  Var run(Tape& tape, const Tensor& x, ActivationMap* activations, Bind&& bind) const;
  std::size_t index_of(const std::string& name) const;

  ModelConfig config_;
  std::size_t num_variables_;
  std::vector<Parameter> params_;
};

// Parameters of one residual block bound on a tape. Affine vars are present
// only for variants whose spatial branch carries the affine transform.
struct ResidualBlockVars {
  std::optional<AffineVars> affine;
  Var filter_weight, filter_bias;
  Var gate_weight, gate_bias;
  Var proj_weight, proj_bias;
};

// z + proj(tanh(conv_f(m)) * sigmoid(conv_g(m))), m = mvmt(z). `layer` is
// 0-based and sets the dilation 2^layer. `branches_out` receives the MVMT
// branch activations when non-null.
Var residual_block(const Var& z, const ResidualBlockVars& params, const ModelConfig& config,
                   std::size_t layer, MvmtOutput* branches_out = nullptr);

// Dilated causal conv of a single [T, c_in] signal; see causal_conv in
// autodiff.hpp for the batched differentiable form.
Tensor causal_conv(const Tensor& z, const Tensor& filter, std::size_t dilation,
                   Padding padding = Padding::kZero);

// Z[..., N, T, d] -> Z[..., N, d]: the most recent time slot.
Var temporal_pool(const Var& z);

}  // namespace mvmt
