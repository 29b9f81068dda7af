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

#ifndef MVMT_MVMT_H_
#define MVMT_MVMT_H_

// C interface to the MVMT forecasting library. Every call returns an
// mvmt_status; on failure mvmt_last_error() describes the problem for the
// calling thread until its next failing call. Handles are opaque and owned by
// the caller, who releases them with the matching *_free function.

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MVMT_API __declspec(dllexport)
#else
#define MVMT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

// Values double as CLI exit codes.
typedef enum mvmt_status {
  MVMT_OK = 0,
  MVMT_ERR_INTERNAL = 1,
  MVMT_ERR_INVALID_ARGUMENT = 2,  // bad flag value, unknown variant/stage/split
  MVMT_ERR_DATA = 3,              // malformed CSV, config or checkpoint; inconsistent shapes
  MVMT_ERR_IO = 4,                // unreadable or unwritable file
  MVMT_ERR_NUMERIC = 5            // non-finite loss during training
} mvmt_status;

MVMT_API const char* mvmt_version(void);
MVMT_API const char* mvmt_last_error(void);
MVMT_API const char* mvmt_status_name(mvmt_status status);

// Strings returned through char** out-parameters are released with this.
MVMT_API void mvmt_string_free(char* str);

// ---- series ----------------------------------------------------------------

typedef struct mvmt_series mvmt_series;

MVMT_API mvmt_status mvmt_series_load_csv(const char* path, mvmt_series** out);
MVMT_API void mvmt_series_free(mvmt_series* series);
MVMT_API size_t mvmt_series_num_variables(const mvmt_series* series);
MVMT_API size_t mvmt_series_num_timesteps(const mvmt_series* series);
MVMT_API int64_t mvmt_series_sample_rate(const mvmt_series* series);
// Row-major [N, T_total] copy; `len` must equal N * T_total.
MVMT_API mvmt_status mvmt_series_values(const mvmt_series* series, double* out, size_t len);
// Variable id of column `index`, or NULL when out of range. Owned by the series.
MVMT_API const char* mvmt_series_variable_id(const mvmt_series* series, size_t index);

// ---- model -----------------------------------------------------------------

typedef struct mvmt_model mvmt_model;

// New randomly initialized model. `config_json` is a run config document (see
// README) or NULL for defaults; `variant` ("a".."f") overrides it when non-NULL.
MVMT_API mvmt_status mvmt_model_create(const char* config_json, const char* variant,
                                       size_t num_variables, uint64_t seed, mvmt_model** out);
MVMT_API mvmt_status mvmt_model_load(const char* checkpoint_path, mvmt_model** out);
MVMT_API mvmt_status mvmt_model_save(const mvmt_model* model, const char* checkpoint_path);
MVMT_API void mvmt_model_free(mvmt_model* model);

MVMT_API size_t mvmt_model_num_variables(const mvmt_model* model);
MVMT_API size_t mvmt_model_input_length(const mvmt_model* model);
MVMT_API size_t mvmt_model_output_length(const mvmt_model* model);
MVMT_API size_t mvmt_model_parameter_count(const mvmt_model* model);
MVMT_API size_t mvmt_model_receptive_field(const mvmt_model* model);
MVMT_API char mvmt_model_variant(const mvmt_model* model);

// Forecast for one window. `window` is row-major [N, T_in] and `out` receives
// [N, T_out]. Loaded checkpoints map values through their standardization;
// freshly created models work in the scale given.
MVMT_API mvmt_status mvmt_model_forecast(const mvmt_model* model, const double* window, size_t window_len,
                                         double* out, size_t out_len);

// Activation of `stage` ("input", "block_<l>.original|spatial|temporal",
// "pooled") for one window. With `out` NULL only `*written` is set to the
// required length.
MVMT_API mvmt_status mvmt_model_representation(const mvmt_model* model, const double* window,
                                               size_t window_len, const char* stage, double* out,
                                               size_t out_len, size_t* written);

// ---- commands --------------------------------------------------------------

// Writes the CSV and <out_csv>.latents.json from a synthetic spec document.
MVMT_API mvmt_status mvmt_synth(const char* spec_path, const char* out_csv, uint64_t seed);

typedef struct mvmt_train_options {
  const char* data_path;
  const char* config_path;  // may be NULL
  const char* variant;      // may be NULL
  const char* out_dir;
  const char* resume_path;  // may be NULL
  int has_seed;
  uint64_t seed;
} mvmt_train_options;

// Trains into out_dir; `metrics_json` (may be NULL) receives metrics.json.
MVMT_API mvmt_status mvmt_train(const mvmt_train_options* options, char** metrics_json);

// `split` is "train", "validation" or "test"; `out_json` may be NULL.
MVMT_API mvmt_status mvmt_eval(const char* checkpoint_path, const char* data_path, const char* split,
                               const char* out_json, char** result_json);

typedef struct mvmt_sweep_options {
  const char* data_path;
  const char* config_path;  // may be NULL
  const char* out_dir;
  const char* param;        // sweep only: d_z, input_length, kernel, batch_size
  const char* values;       // comma-separated variants (ablate) or integers (sweep)
  const char* variant;      // sweep only, may be NULL
  int has_seed;
  uint64_t seed;
  int parallel;             // run trainings on up to MVMT_THREADS threads
} mvmt_sweep_options;

MVMT_API mvmt_status mvmt_ablate(const mvmt_sweep_options* options, char** table_json);
MVMT_API mvmt_status mvmt_sweep(const mvmt_sweep_options* options, char** table_json);

typedef struct mvmt_repr_options {
  const char* checkpoint_path;
  const char* data_path;
  const char* stage;
  size_t components;
  const char* split;   // NULL: "test"
  size_t max_windows;  // 0: all
  const char* out_dir;
} mvmt_repr_options;

MVMT_API mvmt_status mvmt_repr(const mvmt_repr_options* options, char** result_json);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // MVMT_MVMT_H_
