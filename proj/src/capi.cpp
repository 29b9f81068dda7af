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

#include "mvmt/mvmt.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "mvmt/checkpoint.hpp"
#include "mvmt/error.hpp"
#include "mvmt/eval.hpp"
#include "mvmt/workflow.hpp"

struct mvmt_series {
  mvmt::SeriesMatrix series;
};

struct mvmt_model {
  mvmt::Model model;
  std::optional<mvmt::StandardizationStats> stats;
  std::vector<std::string> variable_ids;
  nlohmann::json run_config;
};

namespace {

thread_local std::string last_error;

mvmt_status status_of(mvmt::ErrorKind kind) {
  switch (kind) {
    case mvmt::ErrorKind::kInvalidArgument: return MVMT_ERR_INVALID_ARGUMENT;
    case mvmt::ErrorKind::kData: return MVMT_ERR_DATA;
    case mvmt::ErrorKind::kIo: return MVMT_ERR_IO;
    case mvmt::ErrorKind::kNumeric: return MVMT_ERR_NUMERIC;
    case mvmt::ErrorKind::kInternal: return MVMT_ERR_INTERNAL;
  }
  return MVMT_ERR_INTERNAL;
}

mvmt_status set_error(mvmt_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class F>
mvmt_status guarded(F&& body) {
  try {
    body();
    return MVMT_OK;
  } catch (const mvmt::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(MVMT_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MVMT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MVMT_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MVMT_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) mvmt::fail(std::string(what) + " must not be NULL");
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

std::vector<std::string> split_list(const char* list) {
  std::vector<std::string> out;
  std::stringstream in(opt(list));
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) mvmt::fail("empty entry in list '" + opt(list) + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) mvmt::fail("list must not be empty");
  return out;
}

mvmt::Tensor window_tensor(const mvmt_model* m, const double* window, std::size_t len) {
  require(window, "window");
  const std::size_t n = m->model.num_variables(), t = m->model.config().input_length;
  if (len != n * t) {
    mvmt::fail("window holds " + std::to_string(len) + " values, expected N*T_in = " + std::to_string(n * t));
  }
  mvmt::Tensor x({n, t}, std::vector<double>(window, window + len));
  return m->stats ? m->stats->standardize(x) : x;
}

}  // namespace

extern "C" {

const char* mvmt_version(void) { return "0.1.0"; }

const char* mvmt_last_error(void) { return last_error.c_str(); }

const char* mvmt_status_name(mvmt_status status) {
  switch (status) {
    case MVMT_OK: return "ok";
    case MVMT_ERR_INTERNAL: return "internal error";
    case MVMT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MVMT_ERR_DATA: return "data error";
    case MVMT_ERR_IO: return "i/o error";
    case MVMT_ERR_NUMERIC: return "numeric error";
  }
  return "unknown status";
}

void mvmt_string_free(char* str) { std::free(str); }

// ---- series ----------------------------------------------------------------

mvmt_status mvmt_series_load_csv(const char* path, mvmt_series** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mvmt_series{mvmt::load_csv(path)};
  });
}

void mvmt_series_free(mvmt_series* series) { delete series; }

size_t mvmt_series_num_variables(const mvmt_series* s) { return s ? s->series.num_variables() : 0; }

size_t mvmt_series_num_timesteps(const mvmt_series* s) { return s ? s->series.num_timesteps() : 0; }

int64_t mvmt_series_sample_rate(const mvmt_series* s) { return s ? s->series.sample_rate : 0; }

mvmt_status mvmt_series_values(const mvmt_series* s, double* out, size_t len) {
  return guarded([&] {
    require(s, "series");
    require(out, "out");
    const mvmt::Tensor& v = s->series.values;
    if (len != v.size()) mvmt::fail("buffer holds " + std::to_string(len) + " values, series has " + std::to_string(v.size()));
    std::copy(v.data().begin(), v.data().end(), out);
  });
}

const char* mvmt_series_variable_id(const mvmt_series* s, size_t index) {
  if (!s || index >= s->series.variable_ids.size()) return nullptr;
  return s->series.variable_ids[index].c_str();
}

// ---- model -----------------------------------------------------------------

mvmt_status mvmt_model_create(const char* config_json, const char* variant, size_t num_variables,
                              uint64_t seed, mvmt_model** out) {
  return guarded([&] {
    require(out, "out");
    mvmt::RunConfig config;
    if (config_json) config = mvmt::parse_run_config(config_json);
    if (variant) config.model.variant = mvmt::parse_variant(variant);
    config.model.validate();
    if (num_variables == 0) mvmt::fail("num_variables must be positive");
    *out = new mvmt_model{mvmt::Model(config.model, num_variables, seed), std::nullopt, {}, config.to_json()};
  });
}

mvmt_status mvmt_model_load(const char* checkpoint_path, mvmt_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    const mvmt::Checkpoint c = mvmt::read_checkpoint(checkpoint_path);
    *out = new mvmt_model{c.to_model(), c.standardization, c.variable_ids, c.run_config};
  });
}

mvmt_status mvmt_model_save(const mvmt_model* m, const char* checkpoint_path) {
  return guarded([&] {
    require(m, "model");
    require(checkpoint_path, "checkpoint_path");
    mvmt::Checkpoint c = mvmt::Checkpoint::from_model(m->model);
    c.standardization = m->stats;
    c.variable_ids = m->variable_ids;
    c.run_config = m->run_config;
    mvmt::write_checkpoint(checkpoint_path, c);
  });
}

void mvmt_model_free(mvmt_model* m) { delete m; }

size_t mvmt_model_num_variables(const mvmt_model* m) { return m ? m->model.num_variables() : 0; }

size_t mvmt_model_input_length(const mvmt_model* m) { return m ? m->model.config().input_length : 0; }

size_t mvmt_model_output_length(const mvmt_model* m) { return m ? m->model.config().output_length : 0; }

size_t mvmt_model_parameter_count(const mvmt_model* m) { return m ? m->model.parameter_count() : 0; }

size_t mvmt_model_receptive_field(const mvmt_model* m) { return m ? m->model.config().receptive_field() : 0; }

char mvmt_model_variant(const mvmt_model* m) { return m ? mvmt::variant_id(m->model.config().variant) : '\0'; }

mvmt_status mvmt_model_forecast(const mvmt_model* m, const double* window, size_t window_len, double* out,
                                size_t out_len) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    const std::size_t expected = m->model.num_variables() * m->model.config().output_length;
    if (out_len != expected) {
      mvmt::fail("output buffer holds " + std::to_string(out_len) + " values, expected N*T_out = " +
                 std::to_string(expected));
    }
    mvmt::Tensor y = m->model.forecast(window_tensor(m, window, window_len));
    if (m->stats) y = m->stats->destandardize(y);
    std::copy(y.data().begin(), y.data().end(), out);
  });
}

mvmt_status mvmt_model_representation(const mvmt_model* m, const double* window, size_t window_len,
                                      const char* stage, double* out, size_t out_len, size_t* written) {
  return guarded([&] {
    require(m, "model");
    require(stage, "stage");
    require(written, "written");
    const mvmt::Tensor r = mvmt::extract_representations(m->model, window_tensor(m, window, window_len), stage);
    *written = r.size();
    if (!out) return;
    if (out_len < r.size()) {
      mvmt::fail("output buffer holds " + std::to_string(out_len) + " values, stage needs " + std::to_string(r.size()));
    }
    std::copy(r.data().begin(), r.data().end(), out);
  });
}

// ---- commands --------------------------------------------------------------

mvmt_status mvmt_synth(const char* spec_path, const char* out_csv, uint64_t seed) {
  return guarded([&] {
    require(spec_path, "spec_path");
    require(out_csv, "out_csv");
    mvmt::run_synth(spec_path, out_csv, seed);
  });
}

mvmt_status mvmt_train(const mvmt_train_options* o, char** metrics_json) {
  return guarded([&] {
    require(o, "options");
    require(o->data_path, "data_path");
    require(o->out_dir, "out_dir");
    mvmt::TrainRequest req;
    req.data_path = o->data_path;
    req.config_path = opt(o->config_path);
    if (o->variant) req.variant = std::string(o->variant);
    if (o->has_seed) req.seed = o->seed;
    req.out_dir = o->out_dir;
    req.resume_path = opt(o->resume_path);
    emit(metrics_json, mvmt::run_train(req).metrics);
  });
}

mvmt_status mvmt_eval(const char* checkpoint_path, const char* data_path, const char* split, const char* out_json,
                      char** result_json) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(data_path, "data_path");
    emit(result_json, mvmt::run_eval(checkpoint_path, data_path, split ? split : "test", opt(out_json)));
  });
}

mvmt_status mvmt_ablate(const mvmt_sweep_options* o, char** table_json) {
  return guarded([&] {
    require(o, "options");
    require(o->data_path, "data_path");
    require(o->out_dir, "out_dir");
    mvmt::AblateRequest req;
    req.data_path = o->data_path;
    req.config_path = opt(o->config_path);
    req.variants = split_list(o->values ? o->values : "a,b,c,d,e,f");
    if (o->has_seed) req.seed = o->seed;
    req.out_dir = o->out_dir;
    req.parallel = o->parallel != 0;
    mvmt::run_ablate(req);
    if (table_json) emit(table_json, nlohmann::json::parse(mvmt::read_file(req.out_dir + "/ablation.json")));
  });
}

mvmt_status mvmt_sweep(const mvmt_sweep_options* o, char** table_json) {
  return guarded([&] {
    require(o, "options");
    require(o->data_path, "data_path");
    require(o->out_dir, "out_dir");
    require(o->param, "param");
    require(o->values, "values");
    mvmt::SweepRequest req;
    req.data_path = o->data_path;
    req.config_path = opt(o->config_path);
    req.param = o->param;
    req.values = split_list(o->values);
    if (o->variant) req.variant = std::string(o->variant);
    if (o->has_seed) req.seed = o->seed;
    req.out_dir = o->out_dir;
    req.parallel = o->parallel != 0;
    mvmt::run_sweep(req);
    if (table_json) emit(table_json, nlohmann::json::parse(mvmt::read_file(req.out_dir + "/sweep.json")));
  });
}

mvmt_status mvmt_repr(const mvmt_repr_options* o, char** result_json) {
  return guarded([&] {
    require(o, "options");
    require(o->checkpoint_path, "checkpoint_path");
    require(o->data_path, "data_path");
    require(o->stage, "stage");
    require(o->out_dir, "out_dir");
    mvmt::ReprRequest req;
    req.checkpoint_path = o->checkpoint_path;
    req.data_path = o->data_path;
    req.stage = o->stage;
    req.components = o->components;
    req.split = o->split ? o->split : "test";
    req.max_windows = o->max_windows;
    req.out_dir = o->out_dir;
    emit(result_json, mvmt::run_repr(req));
  });
}

}  // extern "C"
