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

// Checkpoint file: the line "MVMT1" followed by one JSON document holding the
// model config, named parameter tensors with shapes, and optionally the
// standardization stats, run config snapshot and resumable training state.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mvmt/model.hpp"
#include "mvmt/train.hpp"

namespace mvmt {

inline constexpr const char* kCheckpointMagic = "MVMT1";

struct Checkpoint {
  ModelConfig model_config;
  std::size_t num_variables = 0;
  std::vector<std::string> variable_ids;
  std::vector<std::pair<std::string, Tensor>> parameters;
  std::optional<StandardizationStats> standardization;
  nlohmann::json run_config;  // null when absent
  std::optional<TrainState> train_state;

  static Checkpoint from_model(const Model& model);
  Model to_model() const;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
// Applies the keys present in `j` over `config`; unknown keys are errors.
void model_config_from_json(const nlohmann::json& j, ModelConfig& config);

nlohmann::json train_state_to_json(const TrainState& state);
TrainState train_state_from_json(const nlohmann::json& j);

std::string format_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text, const std::string& source = "<memory>");
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace mvmt
