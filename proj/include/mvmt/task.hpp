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

// Multi-view multi-task operations: task partitions over the (variable, time)
// sample grid, task-wise normalization, the per-variable affine transform,
// and the three-branch block that concatenates them.
//
// Representations are laid out [..., N, T, d]: any leading axes are batch
// axes and every window in the batch gets its own statistics.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mvmt/autodiff.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

enum class View { kOriginal, kSpatial, kTemporal };

std::string to_string(View view);
View parse_view(const std::string& name);

// Finest-granularity partition of the N x T sample grid. Indices are 0-based:
// temporal tasks are time steps (M = T, N members each), spatial tasks are
// variables (M = N, T members each), the original view is one task.
struct TaskPartition {
  View view = View::kOriginal;
  std::size_t num_variables = 0;
  std::size_t window_length = 0;

  std::size_t num_tasks() const;
  std::size_t task_size() const;
  std::size_t task_of(std::size_t n, std::size_t t) const;
  std::vector<std::pair<std::size_t, std::size_t>> members(std::size_t task) const;
};

// Free-function form of TaskPartition::task_of.
std::size_t partition_task(const TaskPartition& partition, std::size_t n, std::size_t t);

// mu and sigma have shape [..., M, d]; sigma = sqrt(biased var + epsilon).
struct TaskStats {
  Var mu;
  Var sigma;
  double epsilon = 0.0;
};

TaskStats task_stats(const Var& z, const TaskPartition& partition, double epsilon);

// (z - mu[m]) / sigma[m] with m = partition(n, t). Differentiable through z
// and through the statistics.
Var task_normalize(const Var& z, const TaskPartition& partition, const TaskStats& stats);

// Convenience: stats from z itself, then normalize.
Var task_normalize(const Var& z, const TaskPartition& partition, double epsilon);

// z[n, t] * w[n] + b[n] elementwise over channels; w, b are [N, d].
Var task_affine(const Var& z, const Var& w, const Var& b);

// Which branches an MVMT block concatenates, in the fixed order
// [original | spatial | temporal].
struct BranchSet {
  bool original = true;
  bool spatial = true;
  bool spatial_affine = true;
  bool temporal = true;

  std::size_t arity() const;
  bool any_mvmt() const { return spatial || temporal; }
};

struct AffineVars {
  Var w;
  Var b;
};

struct MvmtOutput {
  Var output;
  std::optional<Var> original;
  std::optional<Var> spatial;
  std::optional<Var> temporal;
};

// Spatial branch = normalize (spatial view), then per-variable affine when
// enabled. Temporal branch = normalize (temporal view). Original = identity.
MvmtOutput mvmt_block(const Var& z, const BranchSet& branches,
                      const std::optional<AffineVars>& affine, double epsilon);

struct CorrelationProfile {
  double intra = 0.0;
  double inter = 0.0;
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;

  double margin() const { return intra - inter; }
};

// Mean pairwise cosine similarity of the sample vectors z[n, t, :], split by
// whether the pair shares a task. All-zero vectors are excluded.
CorrelationProfile correlation_profile(const Tensor& z, const TaskPartition& partition);

}  // namespace mvmt
