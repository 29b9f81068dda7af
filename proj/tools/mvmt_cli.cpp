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

// mvmt: command-line front end over the C API.
//
// Exit codes: 0 success, 1 internal error, 2 usage error (bad flags, unknown
// variant/stage/split/param), 3 data or config error, 4 I/O error, 5
// non-finite loss during training.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mvmt/mvmt.h"

namespace {

int report(mvmt_status status) {
  if (status != MVMT_OK) std::cerr << "mvmt: " << mvmt_status_name(status) << ": " << mvmt_last_error() << "\n";
  return static_cast<int>(status);
}

int print_and_free(mvmt_status status, char* text) {
  if (status == MVMT_OK && text) std::cout << text << "\n";
  mvmt_string_free(text);
  return report(status);
}

void print_file(const std::string& path) {
  std::ifstream in(path);
  std::cout << in.rdbuf();
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MVMT multivariate time series forecasting"};
  app.set_version_flag("--version", std::string(mvmt_version()));
  app.require_subcommand(1);
  const std::vector<std::string> variants{"a", "b", "c", "d", "e", "f"};

  std::string spec, out, eval_out, ablate_out = "ablation", sweep_out = "sweep", repr_out = "repr", data, config, variant, resume, checkpoint, split = "test", param, values, stage;
  std::uint64_t seed = 0;
  std::size_t pca = 2, max_windows = 0;
  bool parallel = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic panel from a factorization spec");
  synth->add_option("spec", spec, "Synthetic spec JSON")->required();
  synth->add_option("--out", out, "Output CSV (latents go to <out>.latents.json)")->required();
  synth->add_option("--seed", seed, "Top-level seed")->required();

  auto* train = app.add_subcommand("train", "Train one variant into a run directory");
  train->add_option("--data", data, "Input CSV")->required();
  train->add_option("--config", config, "Run config JSON");
  train->add_option("--variant", variant, "MVMT variant")->check(CLI::IsMember(variants));
  train->add_option("--out", out, "Run directory")->required();
  auto* train_seed = train->add_option("--seed", seed, "Overrides train.seed");
  train->add_option("--resume", resume, "Checkpoint to continue from (last.ckpt)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Input CSV")->required();
  eval->add_option("--split", split, "train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  eval->add_option("--out", eval_out, "Write the metrics JSON here as well");

  auto* ablate = app.add_subcommand("ablate", "Train several variants and tabulate test metrics");
  ablate->add_option("--data", data, "Input CSV")->required();
  ablate->add_option("--variants", values, "Comma-separated variant ids")->default_val("a,b,c,d,e,f");
  ablate->add_option("--config", config, "Run config JSON");
  ablate->add_option("--out", ablate_out, "Output directory")->capture_default_str();
  auto* ablate_seed = ablate->add_option("--seed", seed, "Overrides train.seed");
  ablate->add_flag("--parallel", parallel, "Run trainings concurrently (capped by MVMT_THREADS)");

  auto* sweep = app.add_subcommand("sweep", "Train over values of one hyper-parameter");
  sweep->add_option("--param", param, "d_z, input_length, kernel or batch_size")
      ->required()
      ->check(CLI::IsMember({"d_z", "hidden", "input_length", "t_in", "kernel", "batch_size", "batch"}));
  sweep->add_option("--values", values, "Comma-separated positive integers")->required();
  sweep->add_option("--data", data, "Input CSV")->required();
  sweep->add_option("--config", config, "Run config JSON");
  sweep->add_option("--variant", variant, "MVMT variant")->check(CLI::IsMember(variants));
  sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();
  auto* sweep_seed = sweep->add_option("--seed", seed, "Overrides train.seed");
  sweep->add_flag("--parallel", parallel, "Run trainings concurrently (capped by MVMT_THREADS)");

  auto* repr = app.add_subcommand("repr", "PCA projection and separation margins of a stage");
  repr->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  repr->add_option("--data", data, "Input CSV")->required();
  repr->add_option("--stage", stage, "input, block_<l>.original|spatial|temporal, pooled")->required();
  repr->add_option("--pca", pca, "Number of principal components")->default_val(2)->check(CLI::PositiveNumber);
  repr->add_option("--split", split, "train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  repr->add_option("--max-windows", max_windows, "Use at most this many windows (0: all)");
  repr->add_option("--out", repr_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return MVMT_ERR_INVALID_ARGUMENT;
  }

  if (*synth) {
    const mvmt_status st = mvmt_synth(spec.c_str(), out.c_str(), seed);
    if (st == MVMT_OK) std::cout << "wrote " << out << " and " << out << ".latents.json\n";
    return report(st);
  }
  if (*train) {
    mvmt_train_options o{data.c_str(), or_null(config), or_null(variant), out.c_str(), or_null(resume),
                         train_seed->count() > 0, seed};
    char* metrics = nullptr;
    const mvmt_status st = mvmt_train(&o, &metrics);
    return print_and_free(st, metrics);
  }
  if (*eval) {
    char* result = nullptr;
    const mvmt_status st = mvmt_eval(checkpoint.c_str(), data.c_str(), split.c_str(), or_null(eval_out), &result);
    return print_and_free(st, result);
  }
  if (*ablate || *sweep) {
    const bool is_ablate = ablate->parsed();
    const bool has_seed = is_ablate ? ablate_seed->count() > 0 : sweep_seed->count() > 0;
    const std::string& dir = is_ablate ? ablate_out : sweep_out;
    mvmt_sweep_options o{data.c_str(), or_null(config), dir.c_str(), or_null(param), values.c_str(),
                         or_null(variant), has_seed, seed, parallel};
    const mvmt_status st = is_ablate ? mvmt_ablate(&o, nullptr) : mvmt_sweep(&o, nullptr);
    if (st == MVMT_OK) print_file(dir + (is_ablate ? "/ablation.csv" : "/sweep.csv"));
    return report(st);
  }
  if (*repr) {
    mvmt_repr_options o{checkpoint.c_str(), data.c_str(), stage.c_str(), pca, split.c_str(), max_windows, repr_out.c_str()};
    char* result = nullptr;
    const mvmt_status st = mvmt_repr(&o, &result);
    return print_and_free(st, result);
  }
  return MVMT_ERR_INVALID_ARGUMENT;
}
