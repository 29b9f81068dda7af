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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvmt/tensor.hpp"

namespace mvmt {

// Panel of N series over T_total evenly spaced timestamps.
struct SeriesMatrix {
  Tensor values;  // [N, T_total]
  std::vector<std::string> variable_ids;
  std::vector<std::int64_t> timestamps;  // epoch seconds
  std::int64_t sample_rate = 0;          // seconds

  std::size_t num_variables() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t num_timesteps() const { return values.rank() == 2 ? values.dim(1) : 0; }

  // Strictly increasing timestamps with constant stride, finite values,
  // consistent sizes.
  void validate() const;
  // Columns [begin, begin + length).
  SeriesMatrix slice(std::size_t begin, std::size_t length) const;
};

// Header "timestamp,<id1>,<id2>,...", one row per time step. Timestamps are
// epoch seconds or ISO-8601 ("YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]", with 'T'
// separator and optional trailing 'Z').
SeriesMatrix load_csv(const std::string& path);
SeriesMatrix parse_csv(const std::string& text, const std::string& source = "<memory>");
void write_csv(const std::string& path, const SeriesMatrix& series);
std::string format_csv(const SeriesMatrix& series);

std::int64_t parse_timestamp(const std::string& field);

struct SplitSpec {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t input_length = 16;
  std::size_t output_length = 3;

  std::size_t total() const { return train + validation + test; }
  std::size_t window_length() const { return input_length + output_length; }
};

struct WindowSample {
  std::size_t start = 0;  // first input step, absolute index
  Tensor input;           // [N, T_in]
  Tensor target;          // [N, T_out]
};

struct SplitWindows {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
};

// Stride-1 windows, each lying entirely inside one split; a window that would
// straddle a boundary belongs to no split.
SplitWindows window_samples(const Tensor& x, const SplitSpec& split);
// Window start indices only, per split.
std::array<std::vector<std::size_t>, 3> window_starts(std::size_t total_steps,
                                                      const SplitSpec& split);

// Contiguous train / validation / test views, in time order.
std::array<SeriesMatrix, 3> chronological_split(const SeriesMatrix& series, const SplitSpec& split);

}  // namespace mvmt
