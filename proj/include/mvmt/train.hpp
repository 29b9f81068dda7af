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
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvmt/autodiff.hpp"
#include "mvmt/data.hpp"
#include "mvmt/model.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;  // epochs without validation improvement
  std::uint64_t seed = 0;
  bool record_wall_time = false;

  void validate() const;
};

enum class StandardizationMode { kPerVariable, kGlobal };

std::string to_string(StandardizationMode mode);
StandardizationMode parse_standardization(const std::string& name);

// z-score parameters fitted on the training split. Per-variable mode keeps one
// (mean, std) per series; global mode a single pair.
struct StandardizationStats {
  StandardizationMode mode = StandardizationMode::kPerVariable;
  std::vector<double> mean;
  std::vector<double> std;

  static StandardizationStats fit(const Tensor& train_values, StandardizationMode mode);

  // x: [..., N, T]; the variable axis is second to last.
  Tensor standardize(const Tensor& x) const;
  Tensor destandardize(const Tensor& x) const;

  void validate() const;
  nlohmann::json to_json() const;
  static StandardizationStats from_json(const nlohmann::json& j);

 private:
  double mean_of(std::size_t variable) const { return mean.size() == 1 ? mean[0] : mean[variable]; }
  double std_of(std::size_t variable) const { return std.size() == 1 ? std[0] : std[variable]; }
  void check_variables(const Tensor& x) const;
};

// Adam moments per parameter, in model parameter order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// One bias-corrected Adam update from each parameter's accumulated grad.
void adam_step(std::vector<Parameter>& params, AdamState& state, const TrainConfig& config);

// Stacked, standardized windows: inputs [W, N, T_in], targets [W, N, T_out].
struct WindowTensors {
  Tensor inputs;
  Tensor targets;

  std::size_t count() const { return inputs.rank() == 3 ? inputs.dim(0) : 0; }
  Tensor input_batch(const std::vector<std::size_t>& rows) const;
  Tensor target_batch(const std::vector<std::size_t>& rows) const;
};

WindowTensors stack_windows(const std::vector<WindowSample>& windows, const StandardizationStats& stats);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

// Everything needed to continue training where it stopped.
struct TrainState {
  AdamState adam;
  std::size_t epoch = 0;  // completed epochs
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;
  bool stopped = false;
  std::vector<Tensor> best_params;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

// Shuffled mini-batch Adam on MSE in standardized space. Selection and early
// stopping use validation MSE (training MSE when there are no validation
// windows). Epoch shuffles are derived from (seed, epoch), so a resumed state
// continues the exact same sequence.
void train(Model& model, const WindowTensors& train_set, const WindowTensors& validation_set,
           const TrainConfig& config, TrainState& state, const EpochCallback& on_epoch = {});

// Mean squared error of frozen-model predictions, standardized space.
double evaluate_mse(const Model& model, const WindowTensors& set, std::size_t batch_size = 64);

// Predictions for every window, standardized space: [W, N, T_out].
Tensor predict_windows(const Model& model, const Tensor& inputs, std::size_t batch_size = 64);

// Restores the best-validation parameters into the model.
void restore_best(Model& model, const TrainState& state);

}  // namespace mvmt
