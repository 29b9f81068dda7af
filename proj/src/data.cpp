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

#include "mvmt/data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mvmt/error.hpp"

namespace mvmt {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

[[noreturn]] void data_error(const std::string& source, std::size_t line, const std::string& what) {
  fail(ErrorKind::kData, source + ":" + std::to_string(line) + ": " + what);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail(ErrorKind::kInternal, "cannot format value");
  return std::string(buf, ptr);
}

}  // namespace

void SeriesMatrix::validate() const {
  if (values.rank() != 2) fail(ErrorKind::kData, "series values must be [N, T]");
  const std::size_t n = values.dim(0), t = values.dim(1);
  if (variable_ids.size() != n) fail(ErrorKind::kData, "variable id count does not match N");
  if (timestamps.size() != t) fail(ErrorKind::kData, "timestamp count does not match T");
  for (std::size_t i = 1; i < t; ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      fail(ErrorKind::kData, "timestamps not strictly increasing at step " + std::to_string(i));
    }
    if (timestamps[i] - timestamps[i - 1] != sample_rate) {
      fail(ErrorKind::kData, "irregular stride at step " + std::to_string(i));
    }
  }
  for (double v : values.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::kData, "series contains non-finite values");
  }
}

SeriesMatrix SeriesMatrix::slice(std::size_t begin, std::size_t length) const {
  const std::size_t n = num_variables(), t = num_timesteps();
  if (begin + length > t) fail("slice [" + std::to_string(begin) + ", +" + std::to_string(length) +
                               ") exceeds " + std::to_string(t) + " steps");
  SeriesMatrix out;
  out.variable_ids = variable_ids;
  out.sample_rate = sample_rate;
  out.values = Tensor({n, length});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < length; ++j) {
      out.values[i * length + j] = values[i * t + begin + j];
    }
  }
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(begin + length));
  return out;
}

std::int64_t parse_timestamp(const std::string& raw) {
  const std::string s = trim(raw);
  std::int64_t epoch = 0;
  if (parse_int(s, epoch)) return epoch;
  // YYYY-MM-DD[(T| )HH:MM[:SS]][Z]
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  auto num = [&s](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    std::int64_t v = 0;
    if (!parse_int(s.substr(pos, len), v)) return false;
    out = static_cast<int>(v);
    return true;
  };
  bool ok = s.size() >= 10 && num(0, 4, y) && s[4] == '-' && num(5, 2, mo) && s[7] == '-' &&
            num(8, 2, d);
  std::size_t pos = 10;
  if (ok && pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    ok = num(pos + 1, 2, h) && pos + 3 < s.size() && s[pos + 3] == ':' && num(pos + 4, 2, mi);
    pos += 6;
    if (ok && pos < s.size() && s[pos] == ':') {
      ok = num(pos + 1, 2, sec);
      pos += 3;
    }
  }
  if (ok && pos < s.size() && s[pos] == 'Z') ++pos;
  ok = ok && pos == s.size();
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ok || !ymd.ok() || h > 23 || mi > 59 || sec > 60) {
    fail(ErrorKind::kData, "unparseable timestamp '" + s + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec;
}

SeriesMatrix parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.size() < 2) data_error(source, line_no, "header needs 'timestamp' plus at least one variable");
  if (line_no == 1 && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header[0] = header[0].substr(3);
  }
  SeriesMatrix out;
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::string id = trim(header[i]);
    if (id.empty()) data_error(source, line_no, "empty variable id in column " + std::to_string(i + 1));
    out.variable_ids.push_back(std::move(id));
  }
  const std::size_t n = out.variable_ids.size();
  std::vector<double> rows;  // row-major [T, N] while reading
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n + 1) {
      data_error(source, line_no, "expected " + std::to_string(n + 1) + " fields, found " +
                                      std::to_string(fields.size()));
    }
    std::int64_t ts = 0;
    try {
      ts = parse_timestamp(fields[0]);
    } catch (const Error& e) {
      data_error(source, line_no, e.what());
    }
    if (!out.timestamps.empty()) {
      const std::int64_t prev = out.timestamps.back();
      if (ts == prev) data_error(source, line_no, "duplicate timestamp '" + trim(fields[0]) + "'");
      if (ts < prev) data_error(source, line_no, "timestamp '" + trim(fields[0]) + "' goes backwards");
      const std::int64_t stride = ts - prev;
      if (out.timestamps.size() == 1) {
        out.sample_rate = stride;
      } else if (stride != out.sample_rate) {
        data_error(source, line_no, "stride " + std::to_string(stride) + "s differs from sample rate " +
                                        std::to_string(out.sample_rate) + "s");
      }
    }
    out.timestamps.push_back(ts);
    for (std::size_t j = 1; j <= n; ++j) {
      double v = 0.0;
      const std::string cell = trim(fields[j]);
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        data_error(source, line_no, "non-numeric value '" + cell + "' in column '" +
                                        out.variable_ids[j - 1] + "'");
      }
      rows.push_back(v);
    }
  }
  const std::size_t t = out.timestamps.size();
  if (t == 0) data_error(source, line_no, "no data rows");
  out.values = Tensor({n, t});
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.values[c * t + r] = rows[r * n + c];
  }
  return out;
}

SeriesMatrix load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

std::string format_csv(const SeriesMatrix& series) {
  series.validate();
  std::string out = "timestamp";
  for (const auto& id : series.variable_ids) out += "," + id;
  out += "\n";
  const std::size_t n = series.num_variables(), t = series.num_timesteps();
  for (std::size_t r = 0; r < t; ++r) {
    out += std::to_string(series.timestamps[r]);
    for (std::size_t c = 0; c < n; ++c) {
      out += ',';
      out += format_double(series.values[c * t + r]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const SeriesMatrix& series) {
  const std::string text = format_csv(series);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

std::array<std::vector<std::size_t>, 3> window_starts(std::size_t total_steps,
                                                      const SplitSpec& split) {
  if (split.input_length == 0 || split.output_length == 0) {
    fail("input and output lengths must be positive");
  }
  if (split.total() > total_steps) {
    fail("split sizes " + std::to_string(split.train) + "/" + std::to_string(split.validation) +
         "/" + std::to_string(split.test) + " exceed " + std::to_string(total_steps) + " steps");
  }
  std::array<std::vector<std::size_t>, 3> out;
  const std::array<std::size_t, 3> sizes{split.train, split.validation, split.test};
  const std::size_t span = split.window_length();
  std::size_t begin = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t end = begin + sizes[s];
    for (std::size_t start = begin; start + span <= end; ++start) out[s].push_back(start);
    begin = end;
  }
  return out;
}

SplitWindows window_samples(const Tensor& x, const SplitSpec& split) {
  if (x.rank() != 2) fail("window_samples expects [N, T], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), t = x.dim(1);
  const auto starts = window_starts(t, split);
  auto cut = [&](std::size_t start) {
    WindowSample w;
    w.start = start;
    w.input = Tensor({n, split.input_length});
    w.target = Tensor({n, split.output_length});
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.raw() + i * t + start;
      std::copy_n(row, split.input_length, w.input.raw() + i * split.input_length);
      std::copy_n(row + split.input_length, split.output_length,
                  w.target.raw() + i * split.output_length);
    }
    return w;
  };
  SplitWindows out;
  for (std::size_t s : starts[0]) out.train.push_back(cut(s));
  for (std::size_t s : starts[1]) out.validation.push_back(cut(s));
  for (std::size_t s : starts[2]) out.test.push_back(cut(s));
  return out;
}

std::array<SeriesMatrix, 3> chronological_split(const SeriesMatrix& series, const SplitSpec& split) {
  const std::size_t t = series.num_timesteps();
  if (split.total() > t) {
    fail("split sizes sum to " + std::to_string(split.total()) + " but series has " +
         std::to_string(t) + " steps");
  }
  return {series.slice(0, split.train), series.slice(split.train, split.validation),
          series.slice(split.train + split.validation, split.test)};
}

}  // namespace mvmt
