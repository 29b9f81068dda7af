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

#include <cmath>
#include <random>

#include "doctest.h"
#include "mvmt/error.hpp"
#include "mvmt/train.hpp"
#include "support/testing.hpp"

using namespace mvmt;
using mvmt::testing::random_tensor;

namespace {

WindowTensors random_windows(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {random_tensor({count, n, 16}, rng), random_tensor({count, n, 3}, rng)};
}

ModelConfig tiny_model(Variant v = Variant::kA) {
  ModelConfig c;
  c.hidden = 8;
  c.variant = v;
  return c;
}

}  // namespace

TEST_CASE("standardize examples") {
  StandardizationStats s;
  s.mean = {5.0};
  s.std = {5.0};
  s.mode = StandardizationMode::kGlobal;
  const Tensor y = s.standardize(Tensor({1, 2}, std::vector<double>{0, 10}));
  CHECK(y == Tensor({1, 2}, std::vector<double>{-1, 1}));

  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4, 50}, rng, -100.0, 100.0);
  for (StandardizationMode mode : {StandardizationMode::kGlobal, StandardizationMode::kPerVariable}) {
    const StandardizationStats st = StandardizationStats::fit(random_tensor({4, 30}, rng, 0.0, 50.0), mode);
    const Tensor back = st.destandardize(st.standardize(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
    CHECK(StandardizationStats::from_json(st.to_json()).mean == st.mean);
  }
}

TEST_CASE("per-variable standardization fits each series") {
  const Tensor train({2, 4}, std::vector<double>{1, 2, 3, 4, 10, 10, 30, 30});
  const StandardizationStats s = StandardizationStats::fit(train, StandardizationMode::kPerVariable);
  CHECK(s.mean == std::vector<double>{2.5, 20.0});
  CHECK(s.std[0] == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.std[1] == doctest::Approx(10.0));
  const StandardizationStats g = StandardizationStats::fit(train, StandardizationMode::kGlobal);
  CHECK(g.mean.size() == 1);
  CHECK(g.mean[0] == doctest::Approx(11.25));
  CHECK_THROWS_AS(s.standardize(Tensor({3, 4})), Error);
  CHECK(parse_standardization("global") == StandardizationMode::kGlobal);
  CHECK_THROWS_AS(parse_standardization("minmax"), Error);
}

TEST_CASE("stats depend only on the data they are fitted on") {
  std::mt19937_64 rng(2);
  const Tensor full = random_tensor({3, 100}, rng);
  Tensor train({3, 80});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t t = 0; t < 80; ++t) train.at({n, t}) = full.at({n, t});
  const auto a = StandardizationStats::fit(train, StandardizationMode::kPerVariable);
  const auto b = StandardizationStats::fit(full, StandardizationMode::kPerVariable);
  CHECK(a.mean != b.mean);
}

TEST_CASE("zero standard deviation is rejected") {
  try {
    StandardizationStats::fit(Tensor({2, 5}, 3.0), StandardizationMode::kPerVariable);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
  }
}

TEST_CASE("adam first step with unit gradient moves by the learning rate") {
  std::vector<Parameter> params{Parameter("w", Tensor({3}, 2.0))};
  params[0].grad = Tensor({3}, 1.0);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.adam_epsilon = 0.0;
  AdamState state;
  adam_step(params, state, c);
  CHECK(state.step == 1);
  for (double w : params[0].value.data()) CHECK(w == doctest::Approx(1.99).epsilon(1e-14));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  std::vector<Parameter> params{Parameter("w", Tensor::vector({1.0, -2.0}))};
  TrainConfig c;
  AdamState state;
  for (int i = 0; i < 50; ++i) adam_step(params, state, c);
  CHECK(params[0].value == Tensor::vector({1.0, -2.0}));
  CHECK(state.step == 50);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<Parameter> params{Parameter("w", Tensor::vector({0.0}))};
  TrainConfig c;
  c.learning_rate = 0.1;
  AdamState state;
  for (int i = 0; i < 100; ++i) {
    params[0].grad = Tensor::vector({2.0 * (params[0].value[0] - 3.0)});
    adam_step(params, state, c);
  }
  CHECK(std::abs(params[0].value[0] - 3.0) < 0.5);
}

TEST_CASE("adam rejects mismatched gradients") {
  std::vector<Parameter> params{Parameter("w", Tensor({3}))};
  params[0].grad = Tensor({2});
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, state, TrainConfig{}), Error);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.beta2 = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("overfitting four windows") {
  Model m(tiny_model(), 2, 0);
  const WindowTensors data = random_windows(4, 2, 3);
  TrainConfig c;
  c.max_epochs = 500;
  c.patience = 500;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  TrainState state;
  train(m, data, WindowTensors{}, c, state);
  REQUIRE(state.history.size() == 500);
  CHECK(state.history.back().train_loss < 1e-3);
  std::size_t non_increasing = 0;
  for (std::size_t i = 1; i < state.history.size(); ++i) {
    if (state.history[i].train_loss <= state.history[i - 1].train_loss) ++non_increasing;
  }
  CHECK(static_cast<double>(non_increasing) >= 0.9 * 499.0);
  CHECK(std::isnan(state.history.back().val_loss));
  CHECK(evaluate_mse(m, data) < 1e-3);
}

TEST_CASE("training is seed-deterministic") {
  const WindowTensors tr = random_windows(20, 3, 4), va = random_windows(6, 3, 5);
  TrainConfig c;
  c.max_epochs = 3;
  c.learning_rate = 1e-3;
  c.seed = 7;
  auto run = [&](std::uint64_t seed) {
    Model m(tiny_model(), 3, seed);
    TrainState s;
    TrainConfig cc = c;
    cc.seed = seed;
    train(m, tr, va, cc, s);
    return s;
  };
  const TrainState a = run(7), b = run(7), other = run(8);
  REQUIRE(a.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
    CHECK(a.history[i].wall_seconds == 0.0);
  }
  CHECK(a.history[0].train_loss != other.history[0].train_loss);
}

TEST_CASE("resuming reproduces a continuous run") {
  const WindowTensors tr = random_windows(12, 2, 6), va = random_windows(4, 2, 7);
  TrainConfig c;
  c.max_epochs = 4;
  c.learning_rate = 1e-3;
  Model whole(tiny_model(Variant::kE), 2, 1);
  TrainState ws;
  train(whole, tr, va, c, ws);

  Model part(tiny_model(Variant::kE), 2, 1);
  TrainState ps;
  TrainConfig first = c;
  first.max_epochs = 2;
  train(part, tr, va, first, ps);
  train(part, tr, va, c, ps);
  REQUIRE(ps.history.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(ps.history[i].train_loss == ws.history[i].train_loss);
  for (std::size_t i = 0; i < whole.parameters().size(); ++i)
    CHECK(whole.parameters()[i].value == part.parameters()[i].value);
}

TEST_CASE("early stopping and best checkpoint") {
  const WindowTensors tr = random_windows(8, 2, 8), va = random_windows(4, 2, 9);
  Model m(tiny_model(Variant::kF), 2, 2);
  TrainConfig c;
  c.learning_rate = 0.5;  // diverges after the first few epochs
  c.max_epochs = 40;
  c.patience = 3;
  TrainState s;
  try {
    train(m, tr, va, c, s);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
  if (s.stopped) {
    CHECK(s.since_best == 3);
    CHECK(s.history.size() == s.best_epoch + 3);
  }
  CHECK(s.best_epoch >= 1);
  const double best = s.best_val;
  restore_best(m, s);
  CHECK(evaluate_mse(m, va) == best);
}

TEST_CASE("non-finite loss names the batch") {
  WindowTensors tr = random_windows(4, 2, 10);
  tr.inputs[5] = std::numeric_limits<double>::quiet_NaN();
  Model m(tiny_model(Variant::kF), 2, 0);
  TrainConfig c;
  c.batch_size = 2;
  TrainState s;
  try {
    train(m, tr, WindowTensors{}, c, s);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
    CHECK(std::string(e.what()).find(" 0") != std::string::npos);
  }
}

TEST_CASE("an optimizer step touches only parameters") {
  const WindowTensors tr = random_windows(4, 2, 11);
  const WindowTensors copy = tr;
  Model m(tiny_model(), 2, 0);
  TrainConfig c;
  c.max_epochs = 1;
  TrainState s;
  train(m, tr, WindowTensors{}, c, s);
  CHECK(tr.inputs == copy.inputs);
  CHECK(tr.targets == copy.targets);
}

TEST_CASE("predictions batch consistently") {
  const Model m(tiny_model(), 3, 5);
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({10, 3, 16}, rng);
  const Tensor a = predict_windows(m, x, 3), b = predict_windows(m, x, 64);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  CHECK(b == m.forecast(x));
}
