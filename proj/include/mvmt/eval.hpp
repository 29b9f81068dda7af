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

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvmt/model.hpp"
#include "mvmt/task.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

inline constexpr double kMapeZeroThreshold = 1e-8;

struct HorizonMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape;  // percent; empty when every |truth| is below threshold
  std::size_t mape_count = 0;  // entries that entered MAPE
};

struct MetricsReport {
  std::vector<HorizonMetrics> horizons;  // index h-1
  std::vector<double> variable_rmse;     // over all windows and horizons
  std::size_t horizon_count() const { return horizons.size(); }

  nlohmann::json to_json() const;
};

// pred/truth: [..., N, T_out] in original scale; horizon is 1-based. Averages
// over every leading index and variable at that horizon.
HorizonMetrics metrics(const Tensor& pred, const Tensor& truth, std::size_t horizon,
                       double zero_threshold = kMapeZeroThreshold);
MetricsReport metrics_report(const Tensor& pred, const Tensor& truth,
                             double zero_threshold = kMapeZeroThreshold);

struct PcaResult {
  Tensor components;                    // [k, dim], orthonormal rows
  std::vector<double> explained_ratio;  // descending, sums to <= 1
  std::vector<double> explained_variance;
  Tensor mean;                          // [dim]
  Tensor projections;                   // [n_samples, k]
  bool degenerate = false;              // zero total variance

  nlohmann::json to_json() const;
};

// Eigen-decomposition of the centered covariance. Each component is signed so
// its largest-magnitude entry is positive.
PcaResult pca(const Tensor& points, std::size_t n_components);

// Stage names: "input", "block_<l>.original", "block_<l>.spatial",
// "block_<l>.temporal" (1 <= l <= L), "pooled".
void validate_stage(const std::string& stage, const ModelConfig& config);

// Read-only copy of one activation for a standardized window. `window` is
// [N, T_in] (or [B, N, T_in]); the batch axis is dropped for a single window.
Tensor extract_representations(const Model& model, const Tensor& window, const std::string& stage);

// Per-sample vectors of a stage over many windows, laid out [N, W, dim] so the
// spatial view groups by variable and the temporal view by window. Block
// stages flatten the window's [T_in, c] slice per variable.
Tensor stage_samples(const Model& model, const Tensor& windows, const std::string& stage);

struct SeparationEntry {
  std::string stage;
  View view = View::kSpatial;
  CorrelationProfile profile;
};

struct SeparationReport {
  std::vector<SeparationEntry> entries;

  const SeparationEntry& find(const std::string& stage, View view) const;
  nlohmann::json to_json() const;
};

// Correlation profile of each stage's samples ([N, W, dim]) under each view.
SeparationReport separation_report(const std::map<std::string, Tensor>& samples,
                                   const std::vector<View>& views, const ModelConfig& config);

// Extracts the stages from the model over `windows` ([W, N, T_in]) first.
SeparationReport separation_report(const Model& model, const Tensor& windows,
                                   const std::vector<std::string>& stages,
                                   const std::vector<View>& views);

}  // namespace mvmt
