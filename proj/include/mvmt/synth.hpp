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

// Synthetic panels from the global/local factorization
//
//   Z[n, t] = G_spatial[n] * G_temporal[t] * L[n, t]     (elementwise, d_lat)
//   L[n, t] ~ N(beta[m], diag(gamma[m]^2)),  m = task of (n, t)
//   x[n, t] = readout . Z[n, t] + offset
//
// An absent global component is all ones.

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "mvmt/data.hpp"
#include "mvmt/task.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

struct FactorizationSpec {
  std::size_t latent_dim = 4;
  View local_view = View::kSpatial;  // partition indexing local_mean/local_scale
  Tensor global_spatial;             // [N, d] or empty
  Tensor global_temporal;            // [T_total, d] or empty
  Tensor local_mean;                 // [M, d]
  Tensor local_scale;                // [M, d], >= 0
  Tensor readout;                    // [d]; empty draws a fixed random readout
  double readout_offset = 0.0;
  std::uint64_t seed = 0;
  std::int64_t start_timestamp = 1388534400;  // 2014-01-01T00:00:00Z
  std::int64_t sample_rate = 3600;

  void validate(std::size_t num_variables, std::size_t num_timesteps) const;
};

struct SynthLatents {
  Tensor global_spatial;   // [N, d]
  Tensor global_temporal;  // [T_total, d]
  Tensor local_mean;       // [M, d]
  Tensor local_scale;      // [M, d]
  Tensor local;            // [N, T_total, d]
  Tensor readout;          // [d]
  View local_view = View::kSpatial;
};

struct SynthResult {
  SeriesMatrix series;
  SynthLatents latents;
};

SynthResult synth_generate(const FactorizationSpec& spec, std::size_t num_variables,
                           std::size_t num_timesteps);

// Variables that differ only by a positive per-variable scale: shared local
// mean/scale, spatial global component s_n * 1, and a shared temporal global
// component (daily and weekly cycles plus a slow AR(1) drift).
struct PathologyOptions {
  std::size_t latent_dim = 4;
  double scale_min = 1.0;
  double scale_max = 20.0;
  double local_mean = 1.0;
  double noise = 0.01;  // local scale gamma
  double period = 24.0;
  double amplitude = 0.5;
  double weekly_amplitude = 0.2;
  double phase_spread = 0.5;
  double drift_coefficient = 0.95;
  double drift_sigma = 0.0;
};

FactorizationSpec scaling_pathology(std::size_t num_variables, std::size_t num_timesteps,
                                    std::uint64_t seed, const PathologyOptions& options = {});

// Synthetic spec document. Either
//   {"preset": "scaling-pathology", "num_variables": N, "num_timesteps": T, ...options}
// or explicit arrays mirroring FactorizationSpec:
//   {"num_variables", "num_timesteps", "latent_dim", "local_view",
//    "global_spatial", "global_temporal", "local_mean", "local_scale",
//    "readout", "readout_offset", "start_timestamp", "sample_rate"}
// Unknown keys are rejected. The seed always comes from the caller.
struct SynthRequest {
  FactorizationSpec spec;
  std::size_t num_variables = 0;
  std::size_t num_timesteps = 0;
};
SynthRequest synth_request_from_json(const nlohmann::json& doc, std::uint64_t seed);

nlohmann::json latents_to_json(const SynthLatents& latents);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace mvmt
