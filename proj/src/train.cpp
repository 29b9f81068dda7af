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

#include "mvmt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mvmt/error.hpp"
#include "mvmt/random.hpp"

namespace mvmt {

void TrainConfig::validate() const {
  if (batch_size == 0) fail("batch size must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon >= 0.0)) fail("adam epsilon must be non-negative");
}

std::string to_string(StandardizationMode mode) {
  return mode == StandardizationMode::kGlobal ? "global" : "per_variable";
}

StandardizationMode parse_standardization(const std::string& name) {
  if (name == "per_variable") return StandardizationMode::kPerVariable;
  if (name == "global") return StandardizationMode::kGlobal;
  fail("unknown standardization mode '" + name + "' (expected per_variable or global)");
}

// ---- standardization -------------------------------------------------------

StandardizationStats StandardizationStats::fit(const Tensor& x, StandardizationMode mode) {
  if (x.rank() != 2 || x.dim(1) == 0) fail("standardization needs a non-empty [N, T] panel");
  const std::size_t n = x.dim(0), t = x.dim(1);
  StandardizationStats s;
  s.mode = mode;
  auto moments = [](const double* begin, std::size_t count, std::size_t stride, std::size_t rows) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < count; ++i) sum += begin[r * stride + i];
    }
    const double total = static_cast<double>(count * rows);
    const double mean = sum / total;
    double sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < count; ++i) {
        const double d = begin[r * stride + i] - mean;
        sq += d * d;
      }
    }
    return std::pair{mean, std::sqrt(sq / total)};
  };
  if (mode == StandardizationMode::kGlobal) {
    auto [m, sd] = moments(x.raw(), t, t, n);
    s.mean = {m};
    s.std = {sd};
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto [m, sd] = moments(x.raw() + i * t, t, t, 1);
      s.mean.push_back(m);
      s.std.push_back(sd);
    }
  }
  s.validate();
  return s;
}

void StandardizationStats::validate() const {
  if (mean.empty() || mean.size() != std.size()) fail("standardization stats are inconsistent");
  for (std::size_t i = 0; i < std.size(); ++i) {
    if (!(std[i] > 0.0) || !std::isfinite(std[i])) {
      fail(ErrorKind::kData, "zero standard deviation" +
                                 (std.size() > 1 ? " for variable " + std::to_string(i) : std::string()) +
                                 "; cannot standardize");
    }
  }
}

void StandardizationStats::check_variables(const Tensor& x) const {
  if (x.rank() < 2) fail("standardize expects [..., N, T], got " + shape_str(x.shape()));
  if (mode == StandardizationMode::kPerVariable && x.dim(x.rank() - 2) != mean.size()) {
    fail("standardization fitted on " + std::to_string(mean.size()) + " variables, input has " +
         std::to_string(x.dim(x.rank() - 2)));
  }
}

Tensor StandardizationStats::standardize(const Tensor& x) const {
  check_variables(x);
  const std::size_t n = x.dim(x.rank() - 2), t = x.shape().back();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t v = (i / t) % n;
    out[i] = (x[i] - mean_of(v)) / std_of(v);
  }
  return out;
}

Tensor StandardizationStats::destandardize(const Tensor& x) const {
  check_variables(x);
  const std::size_t n = x.dim(x.rank() - 2), t = x.shape().back();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t v = (i / t) % n;
    out[i] = x[i] * std_of(v) + mean_of(v);
  }
  return out;
}

nlohmann::json StandardizationStats::to_json() const {
  return {{"mode", mvmt::to_string(mode)}, {"mean", mean}, {"std", std}};
}

StandardizationStats StandardizationStats::from_json(const nlohmann::json& j) {
  StandardizationStats s;
  s.mode = parse_standardization(j.at("mode").get<std::string>());
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.validate();
  return s;
}

// ---- Adam ------------------------------------------------------------------

void adam_step(std::vector<Parameter>& params, AdamState& state, const TrainConfig& config) {
  if (state.m.empty()) {
    for (const Parameter& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) fail("optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (p.grad.shape() != p.value.shape() || state.m[i].shape() != p.value.shape()) {
      fail("parameter '" + p.name + "' has value " + shape_str(p.value.shape()) + " but grad " +
           shape_str(p.grad.shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p.value[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

// ---- windows ---------------------------------------------------------------

namespace {

Tensor gather(const Tensor& stacked, const std::vector<std::size_t>& rows) {
  const std::size_t per = stacked.size() / stacked.dim(0);
  Shape shape = stacked.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(stacked.raw() + rows[r] * per, per, out.raw() + r * per);
  }
  return out;
}

}  // namespace

Tensor WindowTensors::input_batch(const std::vector<std::size_t>& rows) const { return gather(inputs, rows); }
Tensor WindowTensors::target_batch(const std::vector<std::size_t>& rows) const { return gather(targets, rows); }

WindowTensors stack_windows(const std::vector<WindowSample>& windows, const StandardizationStats& stats) {
  WindowTensors out;
  if (windows.empty()) return out;
  const std::size_t n = windows.front().input.dim(0);
  const std::size_t t_in = windows.front().input.dim(1);
  const std::size_t t_out = windows.front().target.dim(1);
  out.inputs = Tensor({windows.size(), n, t_in});
  out.targets = Tensor({windows.size(), n, t_out});
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const Tensor xi = stats.standardize(windows[w].input);
    const Tensor yi = stats.standardize(windows[w].target);
    std::copy(xi.data().begin(), xi.data().end(), out.inputs.raw() + w * n * t_in);
    std::copy(yi.data().begin(), yi.data().end(), out.targets.raw() + w * n * t_out);
  }
  return out;
}

// ---- loop ------------------------------------------------------------------

Tensor predict_windows(const Model& model, const Tensor& inputs, std::size_t batch_size) {
  const std::size_t count = inputs.dim(0);
  const std::size_t n = model.num_variables();
  const std::size_t t_out = model.config().output_length;
  Tensor out({count, n, t_out});
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    std::vector<std::size_t> rows(std::min(batch_size, count - begin));
    std::iota(rows.begin(), rows.end(), begin);
    Tape tape;
    const Tensor y = model.forward_frozen(tape, gather(inputs, rows)).value();
    std::copy(y.data().begin(), y.data().end(), out.raw() + begin * n * t_out);
  }
  return out;
}

double evaluate_mse(const Model& model, const WindowTensors& set, std::size_t batch_size) {
  if (set.count() == 0) return std::numeric_limits<double>::quiet_NaN();
  const Tensor pred = predict_windows(model, set.inputs, batch_size);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - set.targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

void restore_best(Model& model, const TrainState& state) {
  if (state.best_params.empty()) return;
  auto& params = model.parameters();
  if (state.best_params.size() != params.size()) fail("best parameters do not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = state.best_params[i];
}

void train(Model& model, const WindowTensors& train_set, const WindowTensors& validation_set,
           const TrainConfig& config, TrainState& state, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.count() == 0) fail("no training windows");
  const std::size_t count = train_set.count();
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  const double wall_offset = state.history.empty() ? 0.0 : state.history.back().wall_seconds;

  while (!state.stopped && state.epoch < config.max_epochs) {
    const std::size_t epoch = state.epoch + 1;
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < count; begin += config.batch_size, ++batch_index) {
      const std::vector<std::size_t> rows(
          order.begin() + static_cast<std::ptrdiff_t>(begin),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(begin + config.batch_size, count)));
      Tape tape;
      Var pred = model.forward(tape, train_set.input_batch(rows));
      Var loss = mse_loss(pred, tape.constant(train_set.target_batch(rows)));
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << batch_index
            << " (windows";
        for (std::size_t r : rows) msg << ' ' << r;
        msg << ")";
        fail(ErrorKind::kNumeric, msg.str());
      }
      model.zero_grad();
      tape.backward(loss);
      adam_step(model.parameters(), state.adam, config);
      loss_sum += value * static_cast<double>(rows.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(count);
    rec.val_loss = evaluate_mse(model, validation_set);
    if (config.record_wall_time) {
      rec.wall_seconds = wall_offset + std::chrono::duration<double>(Clock::now() - started).count();
    }
    const double score = validation_set.count() > 0 ? rec.val_loss : rec.train_loss;
    if (!std::isfinite(score)) {
      fail(ErrorKind::kNumeric, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    state.epoch = epoch;
    state.history.push_back(rec);
    if (score < state.best_val) {
      state.best_val = score;
      state.best_epoch = epoch;
      state.since_best = 0;
      state.best_params.clear();
      for (const Parameter& p : model.parameters()) state.best_params.push_back(p.value);
    } else if (++state.since_best >= config.patience) {
      state.stopped = true;
    }
    if (on_epoch) on_epoch(rec, state);
  }
}

}  // namespace mvmt
