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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mvmt/mvmt.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path root;
  Scratch() : root(fs::temp_directory_path() / "mvmt_capi") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  std::string operator/(const std::string& leaf) const { return (root / leaf).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::string take(char* s) {
  std::string out = s ? s : "";
  mvmt_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("library metadata") {
  CHECK(std::string(mvmt_version()).size() > 0);
  CHECK(std::string(mvmt_status_name(MVMT_ERR_IO)) != std::string(mvmt_status_name(MVMT_OK)));
  CHECK(MVMT_ERR_INVALID_ARGUMENT == 2);
  CHECK(MVMT_ERR_NUMERIC == 5);
}

TEST_CASE("series handles") {
  Scratch dir;
  spit(dir / "s.csv", "timestamp,a,b\n0,1,2\n60,3,4\n120,5,6\n");
  mvmt_series* s = nullptr;
  REQUIRE(mvmt_series_load_csv((dir / "s.csv").c_str(), &s) == MVMT_OK);
  CHECK(mvmt_series_num_variables(s) == 2);
  CHECK(mvmt_series_num_timesteps(s) == 3);
  CHECK(mvmt_series_sample_rate(s) == 60);
  CHECK(std::string(mvmt_series_variable_id(s, 1)) == "b");
  CHECK(mvmt_series_variable_id(s, 2) == nullptr);
  std::vector<double> v(6);
  REQUIRE(mvmt_series_values(s, v.data(), v.size()) == MVMT_OK);
  CHECK(v == std::vector<double>{1, 3, 5, 2, 4, 6});
  CHECK(mvmt_series_values(s, v.data(), 5) == MVMT_ERR_INVALID_ARGUMENT);
  mvmt_series_free(s);

  mvmt_series* missing = nullptr;
  CHECK(mvmt_series_load_csv((dir / "nope.csv").c_str(), &missing) == MVMT_ERR_IO);
  CHECK(missing == nullptr);
  CHECK(std::string(mvmt_last_error()).find("nope.csv") != std::string::npos);
  spit(dir / "bad.csv", "timestamp,a\n0,1\n0,2\n");
  CHECK(mvmt_series_load_csv((dir / "bad.csv").c_str(), &missing) == MVMT_ERR_DATA);
  CHECK(mvmt_series_load_csv(nullptr, &missing) == MVMT_ERR_INVALID_ARGUMENT);
}

TEST_CASE("model handles") {
  mvmt_model* m = nullptr;
  REQUIRE(mvmt_model_create(R"({"model": {"hidden": 4}})", "e", 3, 1, &m) == MVMT_OK);
  CHECK(mvmt_model_variant(m) == 'e');
  CHECK(mvmt_model_num_variables(m) == 3);
  CHECK(mvmt_model_input_length(m) == 16);
  CHECK(mvmt_model_output_length(m) == 3);
  CHECK(mvmt_model_receptive_field(m) == 16);
  CHECK(mvmt_model_parameter_count(m) > 0);

  std::vector<double> window(48), out(9);
  for (std::size_t i = 0; i < window.size(); ++i) window[i] = 0.1 * static_cast<double>(i % 7);
  REQUIRE(mvmt_model_forecast(m, window.data(), window.size(), out.data(), out.size()) == MVMT_OK);
  CHECK(mvmt_model_forecast(m, window.data(), 47, out.data(), out.size()) == MVMT_ERR_INVALID_ARGUMENT);
  CHECK(mvmt_model_forecast(m, window.data(), window.size(), out.data(), 8) == MVMT_ERR_INVALID_ARGUMENT);

  std::size_t need = 0;
  REQUIRE(mvmt_model_representation(m, window.data(), window.size(), "block_1.temporal", nullptr, 0, &need) ==
          MVMT_OK);
  CHECK(need == 3 * 16 * 4);
  std::vector<double> rep(need);
  CHECK(mvmt_model_representation(m, window.data(), window.size(), "block_1.temporal", rep.data(), rep.size(),
                                  &need) == MVMT_OK);
  CHECK(mvmt_model_representation(m, window.data(), window.size(), "block_1.spatial", nullptr, 0, &need) ==
        MVMT_ERR_INVALID_ARGUMENT);

  Scratch dir;
  REQUIRE(mvmt_model_save(m, (dir / "m.ckpt").c_str()) == MVMT_OK);
  mvmt_model* back = nullptr;
  REQUIRE(mvmt_model_load((dir / "m.ckpt").c_str(), &back) == MVMT_OK);
  std::vector<double> out2(9);
  REQUIRE(mvmt_model_forecast(back, window.data(), window.size(), out2.data(), out2.size()) == MVMT_OK);
  CHECK(out == out2);
  mvmt_model_free(back);
  mvmt_model_free(m);

  mvmt_model* bad = nullptr;
  CHECK(mvmt_model_create(nullptr, "g", 3, 1, &bad) == MVMT_ERR_INVALID_ARGUMENT);
  CHECK(mvmt_model_create(R"({"model": {"colour": 1}})", nullptr, 3, 1, &bad) == MVMT_ERR_DATA);
  CHECK(mvmt_model_load((dir / "missing.ckpt").c_str(), &bad) == MVMT_ERR_IO);
  spit(dir / "junk.ckpt", "not a checkpoint");
  CHECK(mvmt_model_load((dir / "junk.ckpt").c_str(), &bad) == MVMT_ERR_DATA);
  CHECK(bad == nullptr);
}

TEST_CASE("commands through the C API") {
  Scratch dir;
  spit(dir / "spec.json", R"({"preset": "scaling-pathology", "num_variables": 3, "num_timesteps": 300})");
  REQUIRE(mvmt_synth((dir / "spec.json").c_str(), (dir / "data.csv").c_str(), 0) == MVMT_OK);
  spit(dir / "cfg.json", R"({"model": {"hidden": 4, "layers": 2}, "train": {"max_epochs": 2, "learning_rate": 0.001}})");

  const std::string data = dir / "data.csv", cfg = dir / "cfg.json", out1 = dir / "r1", out2 = dir / "r2";
  mvmt_train_options o{data.c_str(), cfg.c_str(), "a", out1.c_str(), nullptr, 1, 5};
  char* metrics = nullptr;
  REQUIRE(mvmt_train(&o, &metrics) == MVMT_OK);
  const nlohmann::json m1 = nlohmann::json::parse(take(metrics));
  CHECK(m1["variant"] == "a");
  CHECK(m1["seed"] == 5);
  o.out_dir = out2.c_str();
  REQUIRE(mvmt_train(&o, &metrics) == MVMT_OK);
  take(metrics);
  CHECK(slurp(out1 + "/metrics.json") == slurp(out2 + "/metrics.json"));
  CHECK(slurp(out1 + "/loss_history.csv") == slurp(out2 + "/loss_history.csv"));

  char* result = nullptr;
  REQUIRE(mvmt_eval((out1 + "/best.ckpt").c_str(), data.c_str(), "test", nullptr, &result) == MVMT_OK);
  CHECK(nlohmann::json::parse(take(result))["metrics"] == m1["test"]);
  CHECK(mvmt_eval((out1 + "/best.ckpt").c_str(), data.c_str(), "later", nullptr, &result) ==
        MVMT_ERR_INVALID_ARGUMENT);

  mvmt_model* loaded = nullptr;
  REQUIRE(mvmt_model_load((out1 + "/best.ckpt").c_str(), &loaded) == MVMT_OK);
  mvmt_series* s = nullptr;
  REQUIRE(mvmt_series_load_csv(data.c_str(), &s) == MVMT_OK);
  std::vector<double> all(3 * 300), window(3 * 16), pred(9);
  mvmt_series_values(s, all.data(), all.size());
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t t = 0; t < 16; ++t) window[n * 16 + t] = all[n * 300 + 100 + t];
  REQUIRE(mvmt_model_forecast(loaded, window.data(), window.size(), pred.data(), pred.size()) == MVMT_OK);
  // Forecasts come back in the data scale.
  for (std::size_t n = 0; n < 3; ++n) CHECK(std::abs(pred[n * 3] - all[n * 300 + 116]) < 0.5 * std::abs(all[n * 300 + 116]));
  mvmt_series_free(s);
  mvmt_model_free(loaded);

  const std::string ab = dir / "ab";
  mvmt_sweep_options so{data.c_str(), cfg.c_str(), ab.c_str(), nullptr, "a,f", nullptr, 0, 0, 0};
  char* table = nullptr;
  REQUIRE(mvmt_ablate(&so, &table) == MVMT_OK);
  CHECK(nlohmann::json::parse(take(table)).size() == 2);
  so.values = "a,q";
  CHECK(mvmt_ablate(&so, &table) == MVMT_ERR_INVALID_ARGUMENT);

  const std::string rdir = dir / "repr";
  const std::string best = out1 + "/best.ckpt";
  mvmt_repr_options ro{best.c_str(), data.c_str(), "pooled", 2, nullptr, 10, rdir.c_str()};
  REQUIRE(mvmt_repr(&ro, &result) == MVMT_OK);
  CHECK(nlohmann::json::parse(take(result))["windows"] == 10);

  const std::string missing = dir / "missing.ckpt";
  o.resume_path = missing.c_str();
  CHECK(mvmt_train(&o, &metrics) == MVMT_ERR_IO);
  CHECK(mvmt_train(nullptr, &metrics) == MVMT_ERR_INVALID_ARGUMENT);
}
