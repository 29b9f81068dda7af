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

#include <random>

#include "doctest.h"
#include "mvmt/error.hpp"
#include "mvmt/model.hpp"
#include "support/testing.hpp"

using namespace mvmt;
using mvmt::testing::check_gradients;
using mvmt::testing::check_model_gradients;
using mvmt::testing::naive_causal_conv;
using mvmt::testing::random_tensor;

namespace {

constexpr Variant kAllVariants[] = {Variant::kA, Variant::kB, Variant::kC, Variant::kD, Variant::kE, Variant::kF};

ModelConfig small_config(Variant v, std::size_t t_in = 16) {
  ModelConfig c;
  c.hidden = 4;
  c.input_length = t_in;
  c.variant = v;
  return c;
}

Tensor series(std::vector<double> v) { return Tensor({v.size(), 1}, std::move(v)); }

}  // namespace

TEST_CASE("causal conv examples") {
  const Tensor z = series({1, 2, 3, 4});
  const Tensor f = Tensor::vector({1, 1});
  CHECK(causal_conv(z, f, 1) == series({1, 3, 5, 7}));
  CHECK(causal_conv(z, f, 2) == series({1, 2, 4, 6}));
  CHECK(causal_conv(z, f, 1, Padding::kReplicate) == series({2, 3, 5, 7}));
  for (std::size_t d : {1, 2, 5}) CHECK(causal_conv(z, Tensor::vector({1}), d) == z);
  CHECK_THROWS_AS(causal_conv(z, f, 0), Error);
}

TEST_CASE("causal conv matches the naive loop") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t steps = 1 + rng() % 40, k = 1 + rng() % 4, d = 1 + rng() % 8;
    const std::size_t c_in = 1 + rng() % 3, c_out = 1 + rng() % 3;
    const Tensor z = random_tensor({steps, c_in}, rng), w = random_tensor({k, c_in, c_out}, rng);
    const Tensor b = random_tensor({c_out}, rng);
    for (Padding pad : {Padding::kZero, Padding::kReplicate}) {
      Tape tape;
      const Tensor fast = causal_conv(tape.constant(z), tape.constant(w), tape.constant(b), d, pad).value();
      const Tensor slow = naive_causal_conv(z, w, b, d, pad);
      for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-12);
    }
  }
}

TEST_CASE("temporal pool") {
  Tape tape;
  Var z = tape.variable(Tensor({1, 3, 2}, std::vector<double>{1, 2, 3, 4, 9, 8}));
  CHECK(temporal_pool(z).value() == Tensor({1, 2}, std::vector<double>{9, 8}));
  Var one = tape.constant(Tensor({2, 1, 3}, 5.0));
  CHECK(temporal_pool(one).shape() == Shape{2, 3});
  tape.backward(sum_all(temporal_pool(z)));
  CHECK(tape.grad(z) == Tensor({1, 3, 2}, std::vector<double>{0, 0, 0, 0, 1, 1}));
  CHECK_THROWS_AS(temporal_pool(tape.constant(Tensor({2, 0, 3}))), Error);
}

TEST_CASE("receptive field") {
  ModelConfig c;
  CHECK(c.receptive_field() == 16);
  c.kernel = 3;
  CHECK(c.receptive_field() == 31);
  c.kernel = 1;
  CHECK(c.receptive_field() == 1);
}

TEST_CASE("receptive field perturbation probe on the vanilla variant") {
  ModelConfig c = small_config(Variant::kF, 24);
  const Model m(c, 3, 1);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({1, 3, 24}, rng);
  const Tensor base = m.forecast(x);
  const std::size_t rf = c.receptive_field();
  for (std::size_t t = 0; t < 24; ++t) {
    Tensor xp = x;
    xp.at({0, 1, t}) += 1.0;
    const bool changed = !(m.forecast(xp) == base);
    CHECK(changed == (t >= 24 - rf));
  }
}

TEST_CASE("blocks are causal") {
  for (Variant v : {Variant::kF, Variant::kA}) {
    const Model m(small_config(v), 3, 2);
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor({1, 3, 16}, rng);
    for (std::size_t t0 : {4, 9, 15}) {
      Tensor xp = x;
      // Perturb every variable so that the temporal stats at t0 move too.
      for (std::size_t n = 0; n < 3; ++n) xp.at({0, n, t0}) += 0.5 + static_cast<double>(n);
      ActivationMap a0, a1;
      Tape t1, t2;
      m.forward_frozen(t1, x, &a0);
      m.forward_frozen(t2, xp, &a1);
      for (std::size_t l = 1; l <= 4; ++l) {
        const Tensor& y0 = a0.at("block_" + std::to_string(l) + ".output");
        const Tensor& y1 = a1.at("block_" + std::to_string(l) + ".output");
        if (v == Variant::kF) {
          bool past_equal = true, future_changed = false;
          for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t t = 0; t < 16; ++t)
              for (std::size_t c = 0; c < 4; ++c) {
                const bool same = y0.at({0, n, t, c}) == y1.at({0, n, t, c});
                if (t < t0 && !same) past_equal = false;
                if (t == t0 && !same) future_changed = true;
              }
          CHECK(past_equal);
          CHECK(future_changed);
        }
      }
      CHECK(!(m.forecast(xp) == m.forecast(x)));
    }
  }
}

TEST_CASE("parameter count matches the closed form") {
  for (Variant v : kAllVariants) {
    for (std::size_t n : {1, 7}) {
      ModelConfig c = small_config(v);
      c.kernel = 3;
      c.layers = 2;
      const Model m(c, n, 0);
      CHECK(m.parameter_count() == Model::expected_parameter_count(c, n));
    }
  }
  // Default variant (a), N=16: input 32, 4 blocks of 2*16*16 + 2*(2*48*16 + 16) + 16*16 + 16, head 51.
  ModelConfig c;
  const std::size_t block = 512 + 2 * (2 * 48 * 16 + 16) + 256 + 16;
  CHECK(Model(c, 16, 0).parameter_count() == 32 + 4 * block + 51);
}

TEST_CASE("variant wiring") {
  CHECK(small_config(Variant::kA).mvmt_channels() == 12);
  CHECK(small_config(Variant::kE).mvmt_channels() == 8);
  CHECK(small_config(Variant::kF).mvmt_channels() == 4);
  CHECK(variant_id(parse_variant("c")) == 'c');
  CHECK_THROWS_AS(parse_variant("g"), Error);
  const BranchSet c = branches_for(Variant::kC);
  CHECK(c.spatial);
  CHECK_FALSE(c.spatial_affine);
  const BranchSet b = branches_for(Variant::kB);
  CHECK_FALSE(b.original);
  CHECK(Model(small_config(Variant::kC), 2, 0).parameter_count() > 0);
  CHECK_THROWS_AS(Model(small_config(Variant::kC), 2, 0).parameter("block1.affine.w"), Error);
}

TEST_CASE("zero branch weights make a block the identity") {
  for (Variant v : kAllVariants) {
    const ModelConfig c = small_config(v);
    std::mt19937_64 rng(4);
    Tape tape;
    Var z = tape.constant(random_tensor({2, 3, 16, 4}, rng));
    const std::size_t ch = c.mvmt_channels();
    ResidualBlockVars p;
    p.affine = AffineVars{tape.constant(Tensor({3, 4}, 1.0)), tape.constant(Tensor({3, 4}))};
    p.filter_weight = tape.constant(Tensor({2, ch, 4}));
    p.filter_bias = tape.constant(random_tensor({4}, rng));
    p.gate_weight = tape.constant(Tensor({2, ch, 4}));
    p.gate_bias = tape.constant(random_tensor({4}, rng));
    p.proj_weight = tape.constant(Tensor({4, 4}));
    p.proj_bias = tape.constant(Tensor({4}));
    CHECK(residual_block(z, p, c, 2).value() == z.value());
  }
}

TEST_CASE("constant network predicts the head bias") {
  Model m(small_config(Variant::kA), 5, 3);
  for (Parameter& p : m.parameters()) p.value.fill(0.0);
  for (const std::string& name : {"block1.affine.w", "block2.affine.w", "block3.affine.w", "block4.affine.w"})
    m.parameter(name).value.fill(1.0);
  m.parameter("head.bias").value = Tensor::vector({0.25, -1.5, 4.0});
  std::mt19937_64 rng(5);
  const Tensor y = m.forecast(random_tensor({5, 16}, rng));
  CHECK(y.shape() == Shape{5, 3});
  for (std::size_t n = 0; n < 5; ++n) {
    CHECK(y.at({n, 0}) == 0.25);
    CHECK(y.at({n, 1}) == -1.5);
    CHECK(y.at({n, 2}) == 4.0);
  }
}

TEST_CASE("forecast validates input length") {
  const Model m(small_config(Variant::kF), 3, 0);
  CHECK_THROWS_AS(m.forecast(Tensor({3, 15})), Error);
  CHECK_THROWS_AS(m.forecast(Tensor({4, 16})), Error);
  CHECK(m.forecast(Tensor({2, 3, 16})).shape() == Shape{2, 3, 3});
}

TEST_CASE("permutation equivariance") {
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  for (Variant v : kAllVariants) {
    CAPTURE(variant_id(v));
    const Model m(small_config(v), 5, 6);
    Model mp = m;
    for (Parameter& p : mp.parameters()) {
      if (p.name.find("affine") == std::string::npos) continue;
      const Tensor& src = m.parameter(p.name).value;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 4; ++c) p.value.at({i, c}) = src.at({perm[i], c});
    }
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor({5, 16}, rng);
    Tensor xp({5, 16});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t t = 0; t < 16; ++t) xp.at({i, t}) = x.at({perm[i], t});
    const Tensor y = m.forecast(x), yp = mp.forecast(xp);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t h = 0; h < 3; ++h) CHECK(yp.at({i, h}) == doctest::Approx(y.at({perm[i], h})).epsilon(1e-12));
  }
}

TEST_CASE("initialization and forecasts are seed-deterministic") {
  const Model a(small_config(Variant::kA), 4, 11), b(small_config(Variant::kA), 4, 11);
  const Model c(small_config(Variant::kA), 4, 12);
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({3, 4, 16}, rng);
  CHECK(a.forecast(x) == b.forecast(x));
  CHECK_FALSE(a.forecast(x) == c.forecast(x));
}

TEST_CASE("activations are recorded without changing the forecast") {
  const Model m(small_config(Variant::kA), 3, 1);
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor({2, 3, 16}, rng);
  ActivationMap acts;
  Tape tape;
  const Tensor y = m.forward_frozen(tape, x, &acts).value();
  CHECK(y == m.forecast(x));
  CHECK(acts.at("block_1.original").shape() == Shape{2, 3, 16, 4});
  CHECK(acts.at("block_4.temporal").shape() == Shape{2, 3, 16, 4});
  CHECK(acts.at("pooled").shape() == Shape{2, 3, 4});
  CHECK(acts.count("input") == 1);
}

TEST_CASE("end-to-end gradients for every variant") {
  for (Variant v : kAllVariants) {
    CAPTURE(variant_id(v));
    ModelConfig c = small_config(v, 8);
    c.hidden = 3;
    c.layers = 3;
    Model m(c, 3, 4);
    std::mt19937_64 rng(12);
    const auto err = check_model_gradients(m, random_tensor({2, 3, 8}, rng), 4);
    CHECK(err.max_rel < 1e-4);
  }
}

TEST_CASE("residual block gradients with replicate padding") {
  ModelConfig c = small_config(Variant::kA, 6);
  c.padding = Padding::kReplicate;
  c.hidden = 2;
  std::mt19937_64 rng(13);
  const std::size_t ch = c.mvmt_channels();
  const auto err = check_gradients(
      [&c](Tape&, const std::vector<Var>& v) {
        ResidualBlockVars p{AffineVars{v[1], v[2]}, v[3], v[4], v[5], v[6], v[7], v[8]};
        return residual_block(v[0], p, c, 1);
      },
      {random_tensor({2, 6, 2}, rng), random_tensor({2, 2}, rng), random_tensor({2, 2}, rng),
       random_tensor({2, ch, 2}, rng), random_tensor({2}, rng), random_tensor({2, ch, 2}, rng), random_tensor({2}, rng),
       random_tensor({2, 2}, rng), random_tensor({2}, rng)},
      13);
  CHECK(err.max_rel < 1e-5);
}
