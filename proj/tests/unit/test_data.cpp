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

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mvmt/data.hpp"
#include "mvmt/error.hpp"
#include "support/testing.hpp"

using namespace mvmt;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("well-formed csv") {
  const SeriesMatrix s = parse_csv(
      "timestamp,a,b\n"
      "2020-01-01T00:00:00,1,2\n"
      "2020-01-01T01:00:00,3,4.5\n"
      "2020-01-01T02:00:00,-5,6e1\n");
  CHECK(s.num_variables() == 2);
  CHECK(s.num_timesteps() == 3);
  CHECK(s.variable_ids == std::vector<std::string>{"a", "b"});
  CHECK(s.sample_rate == 3600);
  CHECK(s.values == Tensor({2, 3}, std::vector<double>{1, 3, -5, 2, 4.5, 60}));
  CHECK(s.timestamps[0] == 1577836800);
}

TEST_CASE("epoch-second timestamps and blank lines") {
  const SeriesMatrix s = parse_csv("time,x\n\n100,1\n160,2\n\n220,3\n");
  CHECK(s.sample_rate == 60);
  CHECK(s.num_timesteps() == 3);
  CHECK(parse_timestamp("1970-01-02 00:00:00") == 86400);
  CHECK(parse_timestamp("2014-01-01T00:00:00Z") == 1388534400);
}

TEST_CASE("csv errors carry the line number") {
  const std::string dup = message_of([] { parse_csv("t,a\n0,1\n60,2\n60,3\n", "d.csv"); });
  CHECK(dup.find("d.csv:4") != std::string::npos);
  CHECK(dup.find("duplicate") != std::string::npos);
  CHECK(message_of([] { parse_csv("t,a\n0,1\n60,2,3\n"); }).find(":3:") != std::string::npos);
  CHECK(message_of([] { parse_csv("t,a\n0,1\n60,x\n"); }).find(":3:") != std::string::npos);
  CHECK(message_of([] { parse_csv("t,a\n60,1\n0,2\n"); }).find("backwards") != std::string::npos);
  CHECK(message_of([] { parse_csv("t,a\n0,1\n60,2\n180,3\n"); }).find("stride") != std::string::npos);
  CHECK(kind_of([] { parse_csv("t,a\n0,nan\n"); }) == ErrorKind::kData);
  CHECK(kind_of([] { parse_csv("t,a\n"); }) == ErrorKind::kData);
  CHECK(kind_of([] { parse_csv("t\n0\n"); }) == ErrorKind::kData);
  CHECK(kind_of([] { parse_csv("t,a\nyesterday,1\n"); }) == ErrorKind::kData);
  CHECK(kind_of([] { load_csv("/nonexistent/file.csv"); }) == ErrorKind::kIo);
}

TEST_CASE("csv write and load") {
  std::mt19937_64 rng(1);
  SeriesMatrix s;
  s.values = mvmt::testing::random_tensor({3, 5}, rng, -1e3, 1e3);
  s.variable_ids = {"x", "y", "z"};
  s.sample_rate = 900;
  for (std::int64_t t = 0; t < 5; ++t) s.timestamps.push_back(1600000000 + 900 * t);
  const auto path = std::filesystem::temp_directory_path() / "mvmt_test_series.csv";
  write_csv(path.string(), s);
  const SeriesMatrix back = load_csv(path.string());
  std::filesystem::remove(path);
  CHECK(back.values == s.values);
  CHECK(back.timestamps == s.timestamps);
  CHECK(back.variable_ids == s.variable_ids);
}

TEST_CASE("bike-shaped panel with hourly stride") {
  SeriesMatrix s;
  s.values = Tensor({128, 4392});
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = static_cast<double>(i % 97);
  for (std::size_t n = 0; n < 128; ++n) s.variable_ids.push_back("station_" + std::to_string(n));
  for (std::int64_t t = 0; t < 4392; ++t) s.timestamps.push_back(1459468800 + 3600 * t);
  s.sample_rate = 3600;
  const SeriesMatrix back = parse_csv(format_csv(s));
  CHECK(back.num_variables() == 128);
  CHECK(back.num_timesteps() == 4392);
  CHECK(back.sample_rate == 3600);
}

TEST_CASE("window counts") {
  CHECK(window_samples(Tensor({2, 20}), {20, 0, 0, 16, 3}).train.size() == 2);
  CHECK(window_samples(Tensor({2, 19}), {19, 0, 0, 16, 3}).train.size() == 1);
  CHECK(window_samples(Tensor({2, 18}), {18, 0, 0, 16, 3}).train.size() == 0);
  CHECK_THROWS_AS(window_samples(Tensor({2, 20}), {15, 3, 3, 16, 3}), Error);
  CHECK_THROWS_AS(window_starts(20, {20, 0, 0, 0, 3}), Error);
}

TEST_CASE("window contents") {
  Tensor x({2, 25});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 25; ++t) x.at({n, t}) = 100.0 * static_cast<double>(n) + static_cast<double>(t);
  const SplitWindows w = window_samples(x, {25, 0, 0, 16, 3});
  REQUIRE(w.train.size() == 7);
  const WindowSample& s = w.train[4];
  CHECK(s.start == 4);
  CHECK(s.input.at({1, 0}) == 104.0);
  CHECK(s.input.at({0, 15}) == 19.0);
  CHECK(s.target.at({0, 0}) == 20.0);
  CHECK(s.target.at({1, 2}) == 122.0);
}

TEST_CASE("windows never leak across split boundaries") {
  for (const SplitSpec split : {SplitSpec{60, 25, 25, 16, 3}, SplitSpec{1848, 168, 168, 16, 3},
                                SplitSpec{40, 0, 30, 8, 5}}) {
    const auto starts = window_starts(split.total(), split);
    const std::size_t val_begin = split.train, test_begin = split.train + split.validation;
    for (std::size_t s : starts[0]) CHECK(s + split.window_length() <= val_begin);
    for (std::size_t s : starts[1]) {
      CHECK(s >= val_begin);
      CHECK(s + split.window_length() <= test_begin);
    }
    for (std::size_t s : starts[2]) {
      CHECK(s >= test_begin);
      CHECK(s + split.window_length() <= split.total());
    }
    // Stride 1 inside each split, nothing straddling.
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t size = k == 0 ? split.train : k == 1 ? split.validation : split.test;
      const std::size_t expected = size >= split.window_length() ? size - split.window_length() + 1 : 0;
      CHECK(starts[k].size() == expected);
    }
  }
}

TEST_CASE("chronological splits") {
  SeriesMatrix s;
  s.values = Tensor({1, 2184});
  for (std::size_t t = 0; t < 2184; ++t) {
    s.values[t] = static_cast<double>(t);
    s.timestamps.push_back(static_cast<std::int64_t>(t) * 3600);
  }
  s.variable_ids = {"load"};
  s.sample_rate = 3600;
  const auto parts = chronological_split(s, {1848, 168, 168, 16, 3});
  CHECK(parts[0].num_timesteps() == 1848);
  CHECK(parts[1].num_timesteps() == 168);
  CHECK(parts[2].num_timesteps() == 168);
  CHECK(parts[1].values[0] == 1848.0);
  CHECK(parts[2].timestamps[0] == 2016 * 3600);

  SeriesMatrix p = s.slice(0, 2112);
  const auto pems = chronological_split(p, {1632, 240, 240, 16, 3});
  CHECK(pems[0].num_timesteps() == 1632);
  CHECK(pems[1].num_timesteps() == 240);
  CHECK(pems[2].num_timesteps() == 240);

  const auto no_val = chronological_split(s, {2000, 0, 184, 16, 3});
  CHECK(no_val[1].num_timesteps() == 0);
  CHECK(no_val[2].values[0] == 2000.0);
  CHECK_THROWS_AS(chronological_split(s, {2000, 100, 100, 16, 3}), Error);
}
