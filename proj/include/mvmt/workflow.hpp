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

// End-to-end commands shared by the C API and the CLI: synthetic generation,
// training into a run directory, evaluation, ablation and hyper-parameter
// sweeps, and representation dumps.
//
// Run config (JSON, every section and key optional, unknown keys rejected):
//
//   {
//     "model": {"layers", "kernel", "hidden", "input_length", "output_length",
//               "variant", "padding": "zero"|"replicate", "epsilon"},
//     "train": {"batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon",
//               "max_epochs", "patience", "seed", "record_wall_time"},
//     "split": {"train", "validation", "test"},
//     "standardization": "per_variable"|"global",
//     "mape_threshold": 1e-8
//   }
//
// Run directory: manifest.json, config.json, loss_history.csv, best.ckpt,
// last.ckpt, metrics.json.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvmt/data.hpp"
#include "mvmt/eval.hpp"
#include "mvmt/model.hpp"
#include "mvmt/train.hpp"

namespace mvmt {

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::optional<SplitSizes> split;  // default: last 10% test, 10% before it validation
  StandardizationMode standardization = StandardizationMode::kPerVariable;
  double mape_threshold = kMapeZeroThreshold;

  // Applies `j` over the current values.
  void apply_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "<memory>");
RunConfig load_run_config(const std::string& path);
SplitSpec resolve_split(const RunConfig& config, std::size_t total_steps);

// Git blob id ("blob <len>\0<bytes>", SHA-1, hex) of a byte string.
std::string git_blob_hash(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Worker threads for opt-in parallel sweeps: MVMT_THREADS if set (>= 1),
// otherwise the hardware concurrency.
std::size_t thread_cap();

// ---- synth -----------------------------------------------------------------

struct SynthOutputs {
  std::string csv_path;
  std::string latents_path;  // <csv>.latents.json
  std::size_t num_variables = 0;
  std::size_t num_timesteps = 0;
};

SynthOutputs run_synth(const std::string& spec_path, const std::string& out_csv, std::uint64_t seed);

// ---- train -----------------------------------------------------------------

struct TrainRequest {
  std::string data_path;
  std::string config_path;             // empty: defaults
  nlohmann::json overrides;            // merged over the config file, may be null
  std::optional<std::string> variant;  // overrides model.variant
  std::optional<std::uint64_t> seed;   // overrides train.seed
  std::string out_dir;
  std::string resume_path;             // checkpoint to continue from, may be empty
};

struct TrainRun {
  std::string out_dir;
  RunConfig config;
  TrainState state;
  MetricsReport test_metrics;
  std::size_t test_windows = 0;
  nlohmann::json metrics;  // contents of metrics.json
};

TrainRun run_train(const TrainRequest& request);

// ---- eval ------------------------------------------------------------------

// Metrics of a checkpoint on one split ("train", "validation" or "test") of
// `data_path`, using the split and standardization stored with the model.
nlohmann::json run_eval(const std::string& checkpoint_path, const std::string& data_path,
                        const std::string& split, const std::string& out_json = {});

// ---- ablate / sweep --------------------------------------------------------

struct SweepRow {
  std::string label;  // variant id or parameter value
  MetricsReport metrics;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
};

struct AblateRequest {
  std::string data_path;
  std::string config_path;
  std::vector<std::string> variants;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool parallel = false;
};

// One training run per variant under <out>/variant_<id>; writes
// <out>/ablation.csv and <out>/ablation.json.
std::vector<SweepRow> run_ablate(const AblateRequest& request);

struct SweepRequest {
  std::string data_path;
  std::string config_path;
  std::string param;  // d_z|hidden, input_length|t_in, kernel, batch_size
  std::vector<std::string> values;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool parallel = false;
};

// One training run per value under <out>/<param>_<value>; writes
// <out>/sweep.csv and <out>/sweep.json.
std::vector<SweepRow> run_sweep(const SweepRequest& request);

// Columns: label, then h<k>_rmse, h<k>_mae, h<k>_mape for every horizon.
std::string format_sweep_csv(const std::string& label_column, const std::vector<SweepRow>& rows);

// ---- repr ------------------------------------------------------------------

struct ReprRequest {
  std::string checkpoint_path;
  std::string data_path;
  std::string stage;
  std::size_t components = 2;
  std::string split = "test";
  std::size_t max_windows = 0;  // 0: every window of the split
  std::string out_dir;
};

// PCA of the stage's per-(variable, window) vectors. Writes
// <out>/repr.json (variance explained, separation margins at the stage and
// the raw input) and <out>/repr_points.csv (x, y, group, window).
nlohmann::json run_repr(const ReprRequest& request);

}  // namespace mvmt
