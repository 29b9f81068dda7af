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

#include "mvmt/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mvmt/error.hpp"
#include "mvmt/synth.hpp"

namespace mvmt {

using nlohmann::json;

namespace {

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json tensors_to_json(const std::vector<Tensor>& ts) {
  json out = json::array();
  for (const Tensor& t : ts) out.push_back(tensor_to_json(t));
  return out;
}

std::vector<Tensor> tensors_from_json(const json& j) {
  std::vector<Tensor> out;
  for (const json& t : j) out.push_back(tensor_from_json(t));
  return out;
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"kernel", c.kernel},
          {"hidden", c.hidden},
          {"input_length", c.input_length},
          {"output_length", c.output_length},
          {"variant", std::string(1, variant_id(c.variant))},
          {"padding", c.padding == Padding::kZero ? "zero" : "replicate"},
          {"epsilon", c.epsilon}};
}

void model_config_from_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) fail(ErrorKind::kData, "model config must be an object");
  static const std::set<std::string> keys{"layers", "kernel", "hidden", "input_length",
                                          "output_length", "variant", "padding", "epsilon"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) fail(ErrorKind::kData, "unknown key 'model." + key + "'");
  }
  if (j.contains("layers")) c.layers = j["layers"].get<std::size_t>();
  if (j.contains("kernel")) c.kernel = j["kernel"].get<std::size_t>();
  if (j.contains("hidden")) c.hidden = j["hidden"].get<std::size_t>();
  if (j.contains("input_length")) c.input_length = j["input_length"].get<std::size_t>();
  if (j.contains("output_length")) c.output_length = j["output_length"].get<std::size_t>();
  if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
  if (j.contains("padding")) {
    const std::string p = j["padding"].get<std::string>();
    if (p == "zero") c.padding = Padding::kZero;
    else if (p == "replicate") c.padding = Padding::kReplicate;
    else fail(ErrorKind::kData, "unknown padding '" + p + "' (expected zero or replicate)");
  }
  if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
}

json train_state_to_json(const TrainState& s) {
  json history = json::array();
  for (const EpochRecord& r : s.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", nullable(r.train_loss)},
                       {"val_loss", nullable(r.val_loss)},
                       {"wall_seconds", r.wall_seconds}});
  }
  return {{"adam", {{"step", s.adam.step}, {"m", tensors_to_json(s.adam.m)}, {"v", tensors_to_json(s.adam.v)}}},
          {"epoch", s.epoch},
          {"best_val", nullable(s.best_val)},
          {"best_epoch", s.best_epoch},
          {"since_best", s.since_best},
          {"stopped", s.stopped},
          {"best_params", tensors_to_json(s.best_params)},
          {"history", history}};
}

TrainState train_state_from_json(const json& j) {
  TrainState s;
  s.adam.step = j.at("adam").at("step").get<std::uint64_t>();
  s.adam.m = tensors_from_json(j.at("adam").at("m"));
  s.adam.v = tensors_from_json(j.at("adam").at("v"));
  s.epoch = j.at("epoch").get<std::size_t>();
  s.best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("best_val").get<double>();
  s.best_epoch = j.at("best_epoch").get<std::size_t>();
  s.since_best = j.at("since_best").get<std::size_t>();
  s.stopped = j.at("stopped").get<bool>();
  s.best_params = tensors_from_json(j.at("best_params"));
  for (const json& r : j.at("history")) {
    EpochRecord rec;
    rec.epoch = r.at("epoch").get<std::size_t>();
    rec.train_loss = from_nullable(r.at("train_loss"));
    rec.val_loss = from_nullable(r.at("val_loss"));
    rec.wall_seconds = r.at("wall_seconds").get<double>();
    s.history.push_back(rec);
  }
  return s;
}

Checkpoint Checkpoint::from_model(const Model& model) {
  Checkpoint c;
  c.model_config = model.config();
  c.num_variables = model.num_variables();
  for (const Parameter& p : model.parameters()) c.parameters.emplace_back(p.name, p.value);
  return c;
}

Model Checkpoint::to_model() const {
  Model model(model_config, num_variables, 0);
  auto& params = model.parameters();
  if (params.size() != parameters.size()) {
    fail(ErrorKind::kData, "checkpoint holds " + std::to_string(parameters.size()) +
                               " parameters, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, value] : parameters) {
    Parameter& p = model.parameter(name);
    if (p.value.shape() != value.shape()) {
      fail(ErrorKind::kData, "checkpoint parameter '" + name + "' has shape " + shape_str(value.shape()) +
                                 ", expected " + shape_str(p.value.shape()));
    }
    p.value = value;
    p.zero_grad();
  }
  return model;
}

std::string format_checkpoint(const Checkpoint& c) {
  json params = json::array();
  for (const auto& [name, value] : c.parameters) {
    json t = tensor_to_json(value);
    t["name"] = name;
    params.push_back(std::move(t));
  }
  json doc{{"format", kCheckpointMagic},
           {"model", model_config_to_json(c.model_config)},
           {"num_variables", c.num_variables},
           {"variable_ids", c.variable_ids},
           {"parameters", params},
           {"standardization", c.standardization ? c.standardization->to_json() : json(nullptr)},
           {"run_config", c.run_config},
           {"train_state", c.train_state ? train_state_to_json(*c.train_state) : json(nullptr)}};
  return std::string(kCheckpointMagic) + "\n" + doc.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& source) {
  const auto newline = text.find('\n');
  if (newline == std::string::npos || text.compare(0, newline, kCheckpointMagic) != 0) {
    fail(ErrorKind::kData, source + ": not an " + std::string(kCheckpointMagic) + " checkpoint");
  }
  Checkpoint c;
  try {
    const json doc = json::parse(text.substr(newline + 1));
    model_config_from_json(doc.at("model"), c.model_config);
    c.model_config.validate();
    c.num_variables = doc.at("num_variables").get<std::size_t>();
    c.variable_ids = doc.at("variable_ids").get<std::vector<std::string>>();
    for (const json& p : doc.at("parameters")) {
      c.parameters.emplace_back(p.at("name").get<std::string>(), tensor_from_json(p));
    }
    if (!doc.at("standardization").is_null()) {
      c.standardization = StandardizationStats::from_json(doc.at("standardization"));
    }
    c.run_config = doc.at("run_config");
    if (!doc.at("train_state").is_null()) c.train_state = train_state_from_json(doc.at("train_state"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, source + ": malformed checkpoint: " + e.what());
  }
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string text = format_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), path);
}

}  // namespace mvmt
