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

#include "mvmt/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "mvmt/error.hpp"
#include "mvmt/random.hpp"

namespace mvmt {

using nlohmann::json;

namespace {

void check_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    fail(ErrorKind::kData, std::string(what) + " has shape " + shape_str(t.shape()) +
                               ", expected " + shape_str(expected));
  }
}

}  // namespace

void FactorizationSpec::validate(std::size_t num_variables, std::size_t num_timesteps) const {
  if (num_variables == 0 || num_timesteps == 0) fail(ErrorKind::kData, "synthetic panel must be non-empty");
  if (latent_dim == 0) fail(ErrorKind::kData, "latent_dim must be positive");
  if (sample_rate <= 0) fail(ErrorKind::kData, "sample_rate must be positive");
  const std::size_t d = latent_dim;
  const TaskPartition p{local_view, num_variables, num_timesteps};
  if (!global_spatial.empty()) check_shape(global_spatial, {num_variables, d}, "global_spatial");
  if (!global_temporal.empty()) check_shape(global_temporal, {num_timesteps, d}, "global_temporal");
  check_shape(local_mean, {p.num_tasks(), d}, "local_mean");
  check_shape(local_scale, {p.num_tasks(), d}, "local_scale");
  if (!readout.empty()) check_shape(readout, {d}, "readout");
  for (double g : local_scale.data()) {
    if (!(g >= 0.0)) {
      fail(ErrorKind::kData, "local_scale entries must be >= 0 (covariance must be positive semidefinite)");
    }
  }
}

SynthResult synth_generate(const FactorizationSpec& spec, std::size_t num_variables,
                           std::size_t num_timesteps) {
  spec.validate(num_variables, num_timesteps);
  const std::size_t n_vars = num_variables, steps = num_timesteps, d = spec.latent_dim;
  const TaskPartition partition{spec.local_view, n_vars, steps};

  SynthLatents lat;
  lat.local_view = spec.local_view;
  lat.global_spatial = spec.global_spatial.empty() ? Tensor({n_vars, d}, 1.0) : spec.global_spatial;
  lat.global_temporal = spec.global_temporal.empty() ? Tensor({steps, d}, 1.0) : spec.global_temporal;
  lat.local_mean = spec.local_mean;
  lat.local_scale = spec.local_scale;
  if (spec.readout.empty()) {
    Rng rng(derive_seed(spec.seed, "synth.readout"));
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    lat.readout = Tensor({d});
    for (double& r : lat.readout.data()) r = dist(rng) / static_cast<double>(d);
  } else {
    lat.readout = spec.readout;
  }

  Rng rng(derive_seed(spec.seed, "synth.local"));
  std::normal_distribution<double> normal(0.0, 1.0);
  lat.local = Tensor({n_vars, steps, d});
  SeriesMatrix series;
  series.values = Tensor({n_vars, steps});
  for (std::size_t n = 0; n < n_vars; ++n) {
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t m = partition.task_of(n, t);
      double x = spec.readout_offset;
      for (std::size_t k = 0; k < d; ++k) {
        const double eps = normal(rng);
        const double l = lat.local_mean[m * d + k] + lat.local_scale[m * d + k] * eps;
        lat.local[(n * steps + t) * d + k] = l;
        const double z = lat.global_spatial[n * d + k] * lat.global_temporal[t * d + k] * l;
        x += lat.readout[k] * z;
      }
      series.values[n * steps + t] = x;
    }
  }
  for (std::size_t n = 0; n < n_vars; ++n) series.variable_ids.push_back("v" + std::to_string(n));
  for (std::size_t t = 0; t < steps; ++t) {
    series.timestamps.push_back(spec.start_timestamp + static_cast<std::int64_t>(t) * spec.sample_rate);
  }
  series.sample_rate = spec.sample_rate;
  return SynthResult{std::move(series), std::move(lat)};
}

FactorizationSpec scaling_pathology(std::size_t num_variables, std::size_t num_timesteps,
                                    std::uint64_t seed, const PathologyOptions& o) {
  if (!(o.scale_min > 0.0) || !(o.scale_max >= o.scale_min)) {
    fail(ErrorKind::kData, "pathology scales need 0 < scale_min <= scale_max");
  }
  if (!(o.period > 0.0)) fail(ErrorKind::kData, "period must be positive");
  const std::size_t d = o.latent_dim;
  Rng rng(derive_seed(seed, "synth.pathology"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  FactorizationSpec spec;
  spec.seed = seed;
  spec.latent_dim = d;
  spec.local_view = View::kSpatial;
  spec.global_spatial = Tensor({num_variables, d});
  const double lo = std::log(o.scale_min), hi = std::log(o.scale_max);
  for (std::size_t n = 0; n < num_variables; ++n) {
    const double s = std::exp(lo + (hi - lo) * unit(rng));
    for (std::size_t k = 0; k < d; ++k) spec.global_spatial[n * d + k] = s;
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double phase = kTwoPi * unit(rng);
  const double weekly_phase = kTwoPi * unit(rng);
  std::vector<double> phases(d), weekly(d);
  for (std::size_t k = 0; k < d; ++k) {
    phases[k] = phase + o.phase_spread * (2.0 * unit(rng) - 1.0);
    weekly[k] = weekly_phase + o.phase_spread * (2.0 * unit(rng) - 1.0);
  }
  spec.global_temporal = Tensor({num_timesteps, d});
  double drift = 0.0;
  for (std::size_t t = 0; t < num_timesteps; ++t) {
    const double tt = static_cast<double>(t);
    drift = o.drift_coefficient * drift + o.drift_sigma * normal(rng);
    for (std::size_t k = 0; k < d; ++k) {
      spec.global_temporal[t * d + k] = 1.0 + o.amplitude * std::sin(kTwoPi * tt / o.period + phases[k]) +
                                        o.weekly_amplitude * std::sin(kTwoPi * tt / (7.0 * o.period) + weekly[k]) +
                                        drift;
    }
  }
  spec.local_mean = Tensor({num_variables, d}, o.local_mean);
  spec.local_scale = Tensor({num_variables, d}, o.noise);
  return spec;
}

json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

Tensor tensor_from_json(const json& j) {
  if (j.is_object()) {
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
  }
  if (j.is_array() && !j.empty() && j.front().is_array()) {
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    Tensor t({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      if (j[r].size() != cols) fail(ErrorKind::kData, "ragged nested array");
      for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] = j[r][c].get<double>();
    }
    return t;
  }
  if (j.is_array()) return Tensor::vector(j.get<std::vector<double>>());
  fail(ErrorKind::kData, "expected a tensor (array or {shape, data})");
}

SynthRequest synth_request_from_json(const json& doc, std::uint64_t seed) {
  if (!doc.is_object()) fail(ErrorKind::kData, "synthetic spec must be a JSON object");
  SynthRequest req;
  try {
    req.num_variables = doc.at("num_variables").get<std::size_t>();
    req.num_timesteps = doc.at("num_timesteps").get<std::size_t>();
    std::set<std::string> allowed{"num_variables", "num_timesteps", "start_timestamp", "sample_rate"};
    if (doc.contains("preset")) {
      const std::string preset = doc.at("preset").get<std::string>();
      if (preset != "scaling-pathology") fail(ErrorKind::kData, "unknown preset '" + preset + "'");
      PathologyOptions o;
      const std::pair<const char*, double*> fields[] = {
          {"scale_min", &o.scale_min}, {"scale_max", &o.scale_max},
          {"local_mean", &o.local_mean}, {"noise", &o.noise},
          {"period", &o.period}, {"amplitude", &o.amplitude},
          {"weekly_amplitude", &o.weekly_amplitude}, {"phase_spread", &o.phase_spread},
          {"drift_coefficient", &o.drift_coefficient}, {"drift_sigma", &o.drift_sigma}};
      allowed.insert({"preset", "latent_dim"});
      for (const auto& [key, ptr] : fields) {
        allowed.insert(key);
        if (doc.contains(key)) *ptr = doc.at(key).get<double>();
      }
      if (doc.contains("latent_dim")) o.latent_dim = doc.at("latent_dim").get<std::size_t>();
      req.spec = scaling_pathology(req.num_variables, req.num_timesteps, seed, o);
    } else {
      allowed.insert({"latent_dim", "local_view", "global_spatial", "global_temporal", "local_mean",
                      "local_scale", "readout", "readout_offset"});
      FactorizationSpec& s = req.spec;
      s.seed = seed;
      if (doc.contains("latent_dim")) s.latent_dim = doc.at("latent_dim").get<std::size_t>();
      if (doc.contains("local_view")) s.local_view = parse_view(doc.at("local_view").get<std::string>());
      if (doc.contains("global_spatial")) s.global_spatial = tensor_from_json(doc.at("global_spatial"));
      if (doc.contains("global_temporal")) s.global_temporal = tensor_from_json(doc.at("global_temporal"));
      s.local_mean = tensor_from_json(doc.at("local_mean"));
      s.local_scale = tensor_from_json(doc.at("local_scale"));
      if (doc.contains("readout")) s.readout = tensor_from_json(doc.at("readout"));
      if (doc.contains("readout_offset")) s.readout_offset = doc.at("readout_offset").get<double>();
    }
    for (const auto& [key, _] : doc.items()) {
      if (!allowed.count(key)) fail(ErrorKind::kData, "unknown key '" + key + "' in synthetic spec");
    }
    if (doc.contains("start_timestamp")) req.spec.start_timestamp = doc.at("start_timestamp").get<std::int64_t>();
    if (doc.contains("sample_rate")) req.spec.sample_rate = doc.at("sample_rate").get<std::int64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("invalid synthetic spec: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidArgument) fail(ErrorKind::kData, e.what());
    throw;
  }
  req.spec.validate(req.num_variables, req.num_timesteps);
  return req;
}

json latents_to_json(const SynthLatents& l) {
  return json{{"local_view", to_string(l.local_view)},
              {"global_spatial", tensor_to_json(l.global_spatial)},
              {"global_temporal", tensor_to_json(l.global_temporal)},
              {"local_mean", tensor_to_json(l.local_mean)},
              {"local_scale", tensor_to_json(l.local_scale)},
              {"local", tensor_to_json(l.local)},
              {"readout", tensor_to_json(l.readout)}};
}

}  // namespace mvmt
