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

#include "mvmt/workflow.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mvmt/checkpoint.hpp"
#include "mvmt/error.hpp"
#include "mvmt/synth.hpp"

namespace mvmt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kData, source + ": invalid JSON: " + e.what());
  }
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kData, "config key '" + key + "' has the wrong type");
  }
}

void check_keys(const json& j, const std::string& section, const std::set<std::string>& keys) {
  if (!j.is_object()) fail(ErrorKind::kData, "config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) {
      fail(ErrorKind::kData, "unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Stacks raw (original-scale) targets: [W, N, T_out].
Tensor raw_targets(const std::vector<WindowSample>& windows) {
  if (windows.empty()) return {};
  const Shape one = windows.front().target.shape();
  Tensor out({windows.size(), one[0], one[1]});
  const std::size_t stride = one[0] * one[1];
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::copy(windows[w].target.data().begin(), windows[w].target.data().end(), out.raw() + w * stride);
  }
  return out;
}

std::optional<MetricsReport> original_scale_metrics(const Model& model, const StandardizationStats& stats,
                                                    const std::vector<WindowSample>& windows,
                                                    double threshold) {
  if (windows.empty()) return std::nullopt;
  const WindowTensors set = stack_windows(windows, stats);
  const Tensor pred = stats.destandardize(predict_windows(model, set.inputs));
  return metrics_report(pred, raw_targets(windows), threshold);
}

json report_or_null(const std::optional<MetricsReport>& r) { return r ? r->to_json() : json(nullptr); }

const std::vector<WindowSample>& pick_split(const SplitWindows& w, const std::string& split) {
  if (split == "train") return w.train;
  if (split == "validation" || split == "val") return w.validation;
  if (split == "test") return w.test;
  fail("unknown split '" + split + "' (expected train, validation or test)");
}

std::string loss_history_csv(const std::vector<EpochRecord>& history, bool wall_time) {
  std::string out = "epoch,train_loss,val_loss,wall_seconds\n";
  for (const EpochRecord& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) +
           "," + (wall_time ? format_double(r.wall_seconds) : std::string()) + "\n";
  }
  return out;
}

void check_variables(std::size_t expected, const SeriesMatrix& data, const std::string& what) {
  if (data.num_variables() != expected) {
    fail(ErrorKind::kData, what + " has N=" + std::to_string(expected) + " variables but the data has N=" +
                               std::to_string(data.num_variables()));
  }
}

// Runs `jobs` either in order or on up to thread_cap() workers. Each job owns
// its outputs; the first failure is rethrown after all workers finish.
template <class Job>
void run_jobs(std::size_t count, bool parallel, Job&& job) {
  const std::size_t workers = parallel ? std::min(count, thread_cap()) : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

SweepRow row_from(const std::string& label, const TrainRun& run) {
  SweepRow row;
  row.label = label;
  row.metrics = run.test_metrics;
  row.best_epoch = run.state.best_epoch;
  row.epochs_run = run.state.epoch;
  row.best_val_loss = run.state.best_val;
  return row;
}

json rows_to_json(const std::string& label_key, const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const SweepRow& r : rows) {
    out.push_back({{label_key, r.label},
                   {"best_epoch", r.best_epoch},
                   {"epochs_run", r.epochs_run},
                   {"best_val_loss", std::isfinite(r.best_val_loss) ? json(r.best_val_loss) : json(nullptr)},
                   {"test", r.metrics.to_json()}});
  }
  return out;
}

}  // namespace

// ---- config ----------------------------------------------------------------

void RunConfig::apply_json(const json& j) {
  if (j.is_null()) return;
  check_keys(j, "", {"model", "train", "split", "standardization", "mape_threshold"});
  try {
    if (j.contains("model")) model_config_from_json(j["model"], model);
  } catch (const json::exception&) {
    fail(ErrorKind::kData, "config section 'model' has a value of the wrong type");
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train", {"batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon", "max_epochs",
                            "patience", "seed", "record_wall_time"});
    if (t.contains("batch_size")) train.batch_size = get_as<std::size_t>(t["batch_size"], "train.batch_size");
    if (t.contains("learning_rate")) train.learning_rate = get_as<double>(t["learning_rate"], "train.learning_rate");
    if (t.contains("beta1")) train.beta1 = get_as<double>(t["beta1"], "train.beta1");
    if (t.contains("beta2")) train.beta2 = get_as<double>(t["beta2"], "train.beta2");
    if (t.contains("adam_epsilon")) train.adam_epsilon = get_as<double>(t["adam_epsilon"], "train.adam_epsilon");
    if (t.contains("max_epochs")) train.max_epochs = get_as<std::size_t>(t["max_epochs"], "train.max_epochs");
    if (t.contains("patience")) train.patience = get_as<std::size_t>(t["patience"], "train.patience");
    if (t.contains("seed")) train.seed = get_as<std::uint64_t>(t["seed"], "train.seed");
    if (t.contains("record_wall_time")) {
      train.record_wall_time = get_as<bool>(t["record_wall_time"], "train.record_wall_time");
    }
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    if (s.is_null()) {
      split.reset();
    } else {
      check_keys(s, "split", {"train", "validation", "test"});
      SplitSizes sizes = split.value_or(SplitSizes{});
      if (s.contains("train")) sizes.train = get_as<std::size_t>(s["train"], "split.train");
      if (s.contains("validation")) sizes.validation = get_as<std::size_t>(s["validation"], "split.validation");
      if (s.contains("test")) sizes.test = get_as<std::size_t>(s["test"], "split.test");
      split = sizes;
    }
  }
  if (j.contains("standardization")) {
    try {
      standardization = parse_standardization(get_as<std::string>(j["standardization"], "standardization"));
    } catch (const Error& e) {
      fail(ErrorKind::kData, e.what());
    }
  }
  if (j.contains("mape_threshold")) mape_threshold = get_as<double>(j["mape_threshold"], "mape_threshold");
}

json RunConfig::to_json() const {
  json j{{"model", model_config_to_json(model)},
         {"train",
          {{"batch_size", train.batch_size},
           {"learning_rate", train.learning_rate},
           {"beta1", train.beta1},
           {"beta2", train.beta2},
           {"adam_epsilon", train.adam_epsilon},
           {"max_epochs", train.max_epochs},
           {"patience", train.patience},
           {"seed", train.seed},
           {"record_wall_time", train.record_wall_time}}},
         {"split", nullptr},
         {"standardization", to_string(standardization)},
         {"mape_threshold", mape_threshold}};
  if (split) j["split"] = {{"train", split->train}, {"validation", split->validation}, {"test", split->test}};
  return j;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(mape_threshold >= 0.0)) fail("mape_threshold must be >= 0");
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig c;
  try {
    c.apply_json(parse_json(text, source));
    c.validate();
  } catch (const Error& e) {
    fail(e.kind() == ErrorKind::kInvalidArgument ? ErrorKind::kData : e.kind(), source + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path), path); }

SplitSpec resolve_split(const RunConfig& config, std::size_t total_steps) {
  SplitSpec s;
  s.input_length = config.model.input_length;
  s.output_length = config.model.output_length;
  if (config.split) {
    s.train = config.split->train;
    s.validation = config.split->validation;
    s.test = config.split->test;
    if (s.total() > total_steps) {
      fail(ErrorKind::kData, "split sizes sum to " + std::to_string(s.total()) + " but the data has " +
                                 std::to_string(total_steps) + " steps");
    }
  } else {
    s.test = total_steps / 10;
    s.validation = total_steps / 10;
    s.train = total_steps - s.test - s.validation;
  }
  return s;
}

// ---- files -----------------------------------------------------------------

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  if (!ok) fail(ErrorKind::kInternal, "SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char c = digest[i];
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out << bytes;
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

std::size_t thread_cap() {
  if (const char* env = std::getenv("MVMT_THREADS")) {
    std::size_t v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- synth -----------------------------------------------------------------

SynthOutputs run_synth(const std::string& spec_path, const std::string& out_csv, std::uint64_t seed) {
  const json doc = parse_json(read_file(spec_path), spec_path);
  SynthRequest req;
  try {
    req = synth_request_from_json(doc, seed);
  } catch (const Error& e) {
    fail(ErrorKind::kData, spec_path + ": " + e.what());
  }
  const SynthResult result = synth_generate(req.spec, req.num_variables, req.num_timesteps);
  const fs::path parent = fs::path(out_csv).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  SynthOutputs out;
  out.csv_path = out_csv;
  out.latents_path = out_csv + ".latents.json";
  out.num_variables = req.num_variables;
  out.num_timesteps = req.num_timesteps;
  write_csv(out_csv, result.series);
  json latents = latents_to_json(result.latents);
  latents["seed"] = seed;
  latents["spec_hash"] = git_blob_hash(read_file(spec_path));
  write_file(out.latents_path, latents.dump() + "\n");
  return out;
}

// ---- train -----------------------------------------------------------------

TrainRun run_train(const TrainRequest& req) {
  if (req.out_dir.empty()) fail("train needs an output directory");
  const std::string data_bytes = read_file(req.data_path);
  const SeriesMatrix data = parse_csv(data_bytes, req.data_path);

  RunConfig config;
  std::string config_hash;
  if (!req.config_path.empty()) {
    const std::string text = read_file(req.config_path);
    config = parse_run_config(text, req.config_path);
    config_hash = git_blob_hash(text);
  }
  try {
    config.apply_json(req.overrides);
    if (req.variant) config.model.variant = parse_variant(*req.variant);
    if (req.seed) config.train.seed = *req.seed;
    config.validate();
  } catch (const Error& e) {
    fail(e.kind(), "config: " + std::string(e.what()));
  }

  const SplitSpec split = resolve_split(config, data.num_timesteps());
  const SplitWindows windows = window_samples(data.values, split);
  if (windows.train.empty()) {
    fail(ErrorKind::kData, "the training split (" + std::to_string(split.train) + " steps) is shorter than one window (" +
                               std::to_string(split.window_length()) + " steps)");
  }

  std::optional<Model> model;
  StandardizationStats stats;
  TrainState state;
  std::string resume_hash;
  if (!req.resume_path.empty()) {
    const std::string text = read_file(req.resume_path);
    resume_hash = git_blob_hash(text);
    const Checkpoint ckpt = parse_checkpoint(text, req.resume_path);
    check_variables(ckpt.num_variables, data, "checkpoint '" + req.resume_path + "'");
    if (model_config_to_json(ckpt.model_config) != model_config_to_json(config.model)) {
      fail(ErrorKind::kData, "checkpoint '" + req.resume_path + "' model config " +
                                 model_config_to_json(ckpt.model_config).dump() + " differs from the run config " +
                                 model_config_to_json(config.model).dump());
    }
    if (!ckpt.train_state || !ckpt.standardization) {
      fail(ErrorKind::kData, "checkpoint '" + req.resume_path + "' carries no training state to resume");
    }
    model.emplace(ckpt.to_model());
    stats = *ckpt.standardization;
    state = *ckpt.train_state;
    state.stopped = false;  // a larger max_epochs or patience may continue a finished run
    state.since_best = std::min(state.since_best, config.train.patience > 0 ? config.train.patience - 1 : 0);
  } else {
    model.emplace(config.model, data.num_variables(), config.train.seed);
    stats = StandardizationStats::fit(chronological_split(data, split)[0].values, config.standardization);
  }

  ensure_dir(req.out_dir);
  json inputs{{"data", git_blob_hash(data_bytes)},
              {"config", config_hash.empty() ? json(nullptr) : json(config_hash)},
              {"resume", resume_hash.empty() ? json(nullptr) : json(resume_hash)}};
  const json manifest{{"command", "train"},
                      {"data_path", req.data_path},
                      {"config_path", req.config_path.empty() ? json(nullptr) : json(req.config_path)},
                      {"resume_path", req.resume_path.empty() ? json(nullptr) : json(req.resume_path)},
                      {"overrides", req.overrides},
                      {"variant", std::string(1, variant_id(config.model.variant))},
                      {"seed", config.train.seed},
                      {"inputs", inputs},
                      {"input_hash", git_blob_hash(inputs.dump() + config.to_json().dump())},
                      {"output_dir", req.out_dir}};
  write_file(join(req.out_dir, "manifest.json"), dump(manifest));
  write_file(join(req.out_dir, "config.json"), dump(config.to_json()));

  const WindowTensors train_set = stack_windows(windows.train, stats);
  const WindowTensors val_set = stack_windows(windows.validation, stats);

  auto make_ckpt = [&](const Model& m, bool with_state) {
    Checkpoint c = Checkpoint::from_model(m);
    c.variable_ids = data.variable_ids;
    c.standardization = stats;
    c.run_config = config.to_json();
    if (with_state) c.train_state = state;
    return c;
  };
  const std::string history_path = join(req.out_dir, "loss_history.csv");
  train(*model, train_set, val_set, config.train, state, [&](const EpochRecord&, const TrainState& s) {
    write_file(history_path, loss_history_csv(s.history, config.train.record_wall_time));
    write_checkpoint(join(req.out_dir, "last.ckpt"), make_ckpt(*model, true));
  });
  write_file(history_path, loss_history_csv(state.history, config.train.record_wall_time));
  write_checkpoint(join(req.out_dir, "last.ckpt"), make_ckpt(*model, true));

  restore_best(*model, state);
  write_checkpoint(join(req.out_dir, "best.ckpt"), make_ckpt(*model, false));

  TrainRun run;
  run.out_dir = req.out_dir;
  run.config = config;
  run.state = state;
  const auto test = original_scale_metrics(*model, stats, windows.test, config.mape_threshold);
  const auto val = original_scale_metrics(*model, stats, windows.validation, config.mape_threshold);
  if (test) run.test_metrics = *test;
  run.test_windows = windows.test.size();
  run.metrics = {{"variant", std::string(1, variant_id(config.model.variant))},
                 {"seed", config.train.seed},
                 {"parameter_count", model->parameter_count()},
                 {"split", {{"train", split.train}, {"validation", split.validation}, {"test", split.test}}},
                 {"windows",
                  {{"train", windows.train.size()},
                   {"validation", windows.validation.size()},
                   {"test", windows.test.size()}}},
                 {"epochs_run", state.epoch},
                 {"best_epoch", state.best_epoch},
                 {"best_val_loss", std::isfinite(state.best_val) ? json(state.best_val) : json(nullptr)},
                 {"stopped_early", state.stopped},
                 {"validation", report_or_null(val)},
                 {"test", report_or_null(test)}};
  write_file(join(req.out_dir, "metrics.json"), dump(run.metrics));
  return run;
}

// ---- eval ------------------------------------------------------------------

namespace {

struct LoadedRun {
  Checkpoint ckpt;
  RunConfig config;
  SeriesMatrix data;
  SplitSpec split;
  SplitWindows windows;
  StandardizationStats stats;
};

LoadedRun load_run(const std::string& checkpoint_path, const std::string& data_path) {
  LoadedRun r;
  r.ckpt = read_checkpoint(checkpoint_path);
  r.data = load_csv(data_path);
  check_variables(r.ckpt.num_variables, r.data, "checkpoint '" + checkpoint_path + "'");
  if (!r.ckpt.run_config.is_null()) r.config.apply_json(r.ckpt.run_config);
  r.config.model = r.ckpt.model_config;
  r.split = resolve_split(r.config, r.data.num_timesteps());
  r.windows = window_samples(r.data.values, r.split);
  r.stats = r.ckpt.standardization
                ? *r.ckpt.standardization
                : StandardizationStats::fit(chronological_split(r.data, r.split)[0].values, r.config.standardization);
  return r;
}

}  // namespace

json run_eval(const std::string& checkpoint_path, const std::string& data_path, const std::string& split,
              const std::string& out_json) {
  const LoadedRun run = load_run(checkpoint_path, data_path);
  const auto& windows = pick_split(run.windows, split);
  if (windows.empty()) fail(ErrorKind::kData, "the " + split + " split holds no complete window");
  const Model model = run.ckpt.to_model();
  const auto report = original_scale_metrics(model, run.stats, windows, run.config.mape_threshold);
  json out{{"variant", std::string(1, variant_id(model.config().variant))},
           {"split", split},
           {"windows", windows.size()},
           {"metrics", report->to_json()}};
  if (!out_json.empty()) {
    const fs::path parent = fs::path(out_json).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    write_file(out_json, dump(out));
  }
  return out;
}

// ---- ablate / sweep --------------------------------------------------------

std::string format_sweep_csv(const std::string& label_column, const std::vector<SweepRow>& rows) {
  std::size_t horizons = 0;
  for (const SweepRow& r : rows) horizons = std::max(horizons, r.metrics.horizon_count());
  std::string out = label_column;
  for (std::size_t h = 1; h <= horizons; ++h) {
    const std::string p = ",h" + std::to_string(h) + "_";
    out += p + "rmse" + p + "mae" + p + "mape";
  }
  out += "\n";
  for (const SweepRow& r : rows) {
    out += r.label;
    for (std::size_t h = 0; h < horizons; ++h) {
      if (h < r.metrics.horizon_count()) {
        const HorizonMetrics& m = r.metrics.horizons[h];
        out += "," + format_double(m.rmse) + "," + format_double(m.mae) + "," +
               (m.mape ? format_double(*m.mape) : std::string());
      } else {
        out += ",,,";
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<SweepRow> run_ablate(const AblateRequest& req) {
  if (req.variants.empty()) fail("ablate needs at least one variant");
  for (const std::string& v : req.variants) parse_variant(v);
  ensure_dir(req.out_dir);
  write_file(join(req.out_dir, "manifest.json"),
             dump({{"command", "ablate"},
                   {"data_path", req.data_path},
                   {"config_path", req.config_path.empty() ? json(nullptr) : json(req.config_path)},
                   {"variants", req.variants},
                   {"seed", req.seed ? json(*req.seed) : json(nullptr)},
                   {"inputs",
                    {{"data", git_blob_hash(read_file(req.data_path))},
                     {"config", req.config_path.empty() ? json(nullptr)
                                                        : json(git_blob_hash(read_file(req.config_path)))}}},
                   {"output_dir", req.out_dir}}));
  std::vector<SweepRow> rows(req.variants.size());
  run_jobs(req.variants.size(), req.parallel, [&](std::size_t i) {
    TrainRequest t;
    t.data_path = req.data_path;
    t.config_path = req.config_path;
    t.variant = req.variants[i];
    t.seed = req.seed;
    t.out_dir = join(req.out_dir, "variant_" + req.variants[i]);
    rows[i] = row_from(req.variants[i], run_train(t));
  });
  write_file(join(req.out_dir, "ablation.csv"), format_sweep_csv("variant", rows));
  write_file(join(req.out_dir, "ablation.json"), dump(rows_to_json("variant", rows)));
  return rows;
}

std::vector<SweepRow> run_sweep(const SweepRequest& req) {
  std::string section, key;
  if (req.param == "d_z" || req.param == "hidden") {
    section = "model", key = "hidden";
  } else if (req.param == "input_length" || req.param == "t_in") {
    section = "model", key = "input_length";
  } else if (req.param == "kernel") {
    section = "model", key = "kernel";
  } else if (req.param == "batch_size" || req.param == "batch") {
    section = "train", key = "batch_size";
  } else {
    fail("unknown sweep parameter '" + req.param + "' (expected d_z, input_length, kernel or batch_size)");
  }
  if (req.values.empty()) fail("sweep needs at least one value");
  std::vector<std::size_t> values;
  for (const std::string& v : req.values) {
    std::size_t parsed = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), parsed);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || parsed == 0) {
      fail("sweep value '" + v + "' is not a positive integer");
    }
    values.push_back(parsed);
  }
  if (req.variant) parse_variant(*req.variant);
  ensure_dir(req.out_dir);
  write_file(join(req.out_dir, "manifest.json"),
             dump({{"command", "sweep"},
                   {"data_path", req.data_path},
                   {"config_path", req.config_path.empty() ? json(nullptr) : json(req.config_path)},
                   {"param", req.param},
                   {"values", values},
                   {"variant", req.variant ? json(*req.variant) : json(nullptr)},
                   {"seed", req.seed ? json(*req.seed) : json(nullptr)},
                   {"inputs",
                    {{"data", git_blob_hash(read_file(req.data_path))},
                     {"config", req.config_path.empty() ? json(nullptr)
                                                        : json(git_blob_hash(read_file(req.config_path)))}}},
                   {"output_dir", req.out_dir}}));
  std::vector<SweepRow> rows(values.size());
  run_jobs(values.size(), req.parallel, [&](std::size_t i) {
    TrainRequest t;
    t.data_path = req.data_path;
    t.config_path = req.config_path;
    t.overrides = {{section, {{key, values[i]}}}};
    t.variant = req.variant;
    t.seed = req.seed;
    t.out_dir = join(req.out_dir, req.param + "_" + std::to_string(values[i]));
    rows[i] = row_from(std::to_string(values[i]), run_train(t));
  });
  write_file(join(req.out_dir, "sweep.csv"), format_sweep_csv(req.param, rows));
  write_file(join(req.out_dir, "sweep.json"), dump(rows_to_json(req.param, rows)));
  return rows;
}

// ---- repr ------------------------------------------------------------------

json run_repr(const ReprRequest& req) {
  const LoadedRun run = load_run(req.checkpoint_path, req.data_path);
  const Model model = run.ckpt.to_model();
  validate_stage(req.stage, model.config());
  std::vector<WindowSample> windows = pick_split(run.windows, req.split);
  if (req.max_windows > 0 && windows.size() > req.max_windows) windows.resize(req.max_windows);
  if (windows.size() < 2) fail(ErrorKind::kData, "repr needs at least 2 windows in the " + req.split + " split");
  const WindowTensors set = stack_windows(windows, run.stats);
  const std::size_t n = model.num_variables(), w_count = windows.size();

  const Tensor samples = stage_samples(model, set.inputs, req.stage);
  const std::size_t dim = samples.dim(2);
  if (req.components == 0 || req.components > dim) {
    fail("--pca must be in 1.." + std::to_string(dim) + " for stage " + req.stage);
  }
  const PcaResult p = pca(samples.reshaped({n * w_count, dim}), req.components);

  std::map<std::string, Tensor> stage_map{{req.stage, samples}};
  if (req.stage != "input") stage_map["input"] = stage_samples(model, set.inputs, "input");
  json separation = nullptr;
  if (n >= 2) {
    separation = separation_report(stage_map, {View::kSpatial, View::kTemporal}, model.config()).to_json();
  }

  ensure_dir(req.out_dir);
  std::string csv = "x,y,group,window\n";
  for (std::size_t v = 0; v < n; ++v) {
    const std::string& group = v < run.data.variable_ids.size() ? run.data.variable_ids[v] : std::to_string(v);
    for (std::size_t w = 0; w < w_count; ++w) {
      const std::size_t row = v * w_count + w;
      const double x = p.projections[row * req.components];
      const double y = req.components > 1 ? p.projections[row * req.components + 1] : 0.0;
      csv += format_double(x) + "," + format_double(y) + "," + group + "," + std::to_string(windows[w].start) + "\n";
    }
  }
  json out{{"stage", req.stage},
           {"split", req.split},
           {"windows", w_count},
           {"variables", n},
           {"dim", dim},
           {"explained_ratio", p.explained_ratio},
           {"explained_variance", p.explained_variance},
           {"degenerate", p.degenerate},
           {"separation", separation}};
  write_file(join(req.out_dir, "repr_points.csv"), csv);
  write_file(join(req.out_dir, "repr.json"), dump(out));
  return out;
}

}  // namespace mvmt
