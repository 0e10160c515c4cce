// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "visrssi/autodiff.hpp"
#include "visrssi/errors.hpp"

using namespace visrssi;
using visrssi::testing::check_gradients;
using visrssi::testing::fill_away_from_zero;
using visrssi::testing::fill_uniform;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  fill_uniform(t, rng);
  return t;
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("linear forward examples") {
  Graph g(false);
  const auto x = g.input(Tensor(Shape{2}, {3.0, 4.0}));
  const auto eye = g.input(Tensor(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0}));
  const auto zero_b = g.input(Tensor(Shape{2}));
  CHECK(g.value(g.linear(x, eye, zero_b)).storage() == AlignedBuffer{3.0, 4.0});
  const auto zero_w = g.input(Tensor(Shape{2, 2}));
  const auto b = g.input(Tensor(Shape{2}, {1.0, 2.0}));
  CHECK(g.value(g.linear(x, zero_w, b)).storage() == AlignedBuffer{1.0, 2.0});
}

TEST_CASE("linear matches scalar loops") {
  Rng rng(1);
  Graph g(false);
  const Tensor x = random_tensor({4, 5}, rng), w = random_tensor({3, 5}, rng), b = random_tensor({3}, rng);
  const Tensor y = g.value(g.linear(g.input(x), g.input(w), g.input(b)));
  REQUIRE(y.shape() == Shape{4, 3});
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t o = 0; o < 3; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 5; ++i) acc += w[o * 5 + i] * x[n * 5 + i];
      CHECK(y[n * 3 + o] == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("linear shape mismatch") {
  Graph g(false);
  const auto x = g.input(Tensor(Shape{3}));
  const auto w = g.input(Tensor(Shape{2, 4}));
  const auto b = g.input(Tensor(Shape{2}));
  CHECK_THROWS_AS(g.linear(x, w, b), ShapeMismatch);
  const auto w2 = g.input(Tensor(Shape{2, 3}));
  const auto b3 = g.input(Tensor(Shape{3}));
  CHECK_THROWS_AS(g.linear(x, w2, b3), ShapeMismatch);
}

TEST_CASE("relu forward and subgradient") {
  Parameter x{"x", Tensor(Shape{3}, {-1.0, 0.0, 2.0}), Tensor(Shape{3}), false};
  Graph g;
  const auto xv = g.param(x);
  const auto y = g.relu(xv);
  CHECK(g.value(y).storage() == AlignedBuffer{0.0, 0.0, 2.0});
  // loss = mse(relu(x), 0) -> d/dx = 2/3 * relu(x) * 1[x > 0]
  const auto loss = g.mse(y, g.input(Tensor(Shape{3})));
  g.backward(loss);
  CHECK(x.grad[0] == 0.0);
  CHECK(x.grad[1] == 0.0);
  CHECK(x.grad[2] == doctest::Approx(4.0 / 3.0));

  Graph g2(false);
  const auto neg = g2.relu(g2.input(Tensor(Shape{4}, {-1.0, -2.0, -0.5, -1e-9})));
  for (double v : g2.value(neg).values()) CHECK(v == 0.0);
}

TEST_CASE("conv1d_k1 examples") {
  Rng rng(2);
  Graph g(false);
  const Tensor x = random_tensor({1, 4, 6}, rng);
  Tensor eye(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  const auto same = g.conv1d_k1(g.input(x), g.input(eye), g.input(Tensor(Shape{4})));
  CHECK(g.value(same).storage() == x.storage());
}

TEST_CASE("conv1d_k1 equals per-column linear") {
  Rng rng(3);
  Graph g(false);
  const Tensor x = random_tensor({2, 5, 10}, rng), w = random_tensor({32, 5}, rng), b = random_tensor({32}, rng);
  const Tensor y = g.value(g.conv1d_k1(g.input(x), g.input(w), g.input(b)));
  REQUIRE(y.shape() == Shape{2, 32, 10});
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t l = 0; l < 10; ++l) {
      Tensor col(Shape{5});
      for (std::size_t c = 0; c < 5; ++c) col[c] = x[(n * 5 + c) * 10 + l];
      Graph h(false);
      const Tensor ref = h.value(h.linear(h.input(col), h.input(w), h.input(b)));
      for (std::size_t o = 0; o < 32; ++o) CHECK(y[(n * 32 + o) * 10 + l] == doctest::Approx(ref[o]).epsilon(1e-13));
    }
  }
  // L = 1 reduces to a linear layer on the single column
  Graph h(false);
  const Tensor x1 = random_tensor({1, 5, 1}, rng);
  const Tensor y1 = h.value(h.conv1d_k1(h.input(x1), h.input(w), h.input(b)));
  const Tensor r1 = h.value(h.linear(h.input(x1.reshaped({5})), h.input(w), h.input(b)));
  for (std::size_t o = 0; o < 32; ++o) CHECK(y1[o] == doctest::Approx(r1[o]).epsilon(1e-14));
}

TEST_CASE("adaptive_avg_pool1d") {
  Rng rng(4);
  Graph g(false);
  Tensor constant(Shape{1, 3, 10});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t l = 0; l < 10; ++l) constant[c * 10 + l] = static_cast<double>(c) + 0.5;
  const Tensor pc = g.value(g.adaptive_avg_pool1d(g.input(constant)));
  CHECK(pc.shape() == Shape{1, 3});
  for (std::size_t c = 0; c < 3; ++c) CHECK(pc[c] == doctest::Approx(static_cast<double>(c) + 0.5));

  const Tensor single = random_tensor({2, 4, 1}, rng);
  CHECK(g.value(g.adaptive_avg_pool1d(g.input(single))).storage() == single.storage());

  const Tensor x = random_tensor({1, 128, 10}, rng);
  const Tensor p = g.value(g.adaptive_avg_pool1d(g.input(x)));
  for (std::size_t c = 0; c < 128; ++c) {
    double s = 0.0;
    for (std::size_t l = 0; l < 10; ++l) s += x[c * 10 + l];
    CHECK(p[c] == doctest::Approx(s / 10.0).epsilon(1e-14));
  }
}

TEST_CASE("conv2d matches direct convolution") {
  Rng rng(5);
  Graph g(false);
  const Tensor x = random_tensor({2, 3, 7, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
  const Tensor y = g.value(g.conv2d(g.input(x), g.input(w), g.input(b), 2, 1));
  const std::size_t oh = 4, ow = 3;  // floor((7 + 2 - 3) / 2) + 1, floor((6 + 2 - 3) / 2) + 1
  REQUIRE(y.shape() == Shape{2, 4, oh, ow});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b[o];
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t ki = 0; ki < 3; ++ki)
              for (std::size_t kj = 0; kj < 3; ++kj) {
                const long r = static_cast<long>(i * 2 + ki) - 1, q = static_cast<long>(j * 2 + kj) - 1;
                if (r < 0 || q < 0 || r >= 7 || q >= 6) continue;
                acc += w[((o * 3 + c) * 3 + ki) * 3 + kj] * x[((n * 3 + c) * 7 + r) * 6 + q];
              }
          CHECK(y[((n * 4 + o) * oh + i) * ow + j] == doctest::Approx(acc).epsilon(1e-13));
        }
}

TEST_CASE("mse examples") {
  Graph g(false);
  const Tensor t(Shape{2}, {1.0, 2.0});
  CHECK(g.value(g.mse(g.input(t), g.input(t))).item() == 0.0);
  CHECK(g.value(g.mse(g.input(Tensor(Shape{2}, {2.0, 1.0})), g.input(t))).item() == 1.0);
  Rng rng(6);
  const Tensor a = random_tensor({7}, rng), c = random_tensor({7}, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 7; ++i) s += (a[i] - c[i]) * (a[i] - c[i]);
  CHECK(g.value(g.mse(g.input(a), g.input(c))).item() == doctest::Approx(s / 7.0).epsilon(1e-14));
  CHECK_THROWS_AS(g.mse(g.input(Tensor(Shape{3})), g.input(Tensor(Shape{2}))), ShapeMismatch);
}

TEST_CASE("concat, reshape, transpose") {
  Graph g(false);
  const auto a = g.input(Tensor(Shape{2, 1}, {1.0, 2.0}));
  const auto b = g.input(Tensor(Shape{2, 2}, {3.0, 4.0, 5.0, 6.0}));
  const Graph::Var parts[] = {a, b};
  CHECK(g.value(g.concat(parts)).storage() == AlignedBuffer{1, 3, 4, 2, 5, 6});
  const auto t = g.transpose_last2(g.input(Tensor(Shape{1, 2, 3}, {1, 2, 3, 4, 5, 6})));
  CHECK(g.value(t).shape() == Shape{1, 3, 2});
  CHECK(g.value(t).storage() == AlignedBuffer{1, 4, 2, 5, 3, 6});
  CHECK_THROWS_AS(g.reshape(a, Shape{3}), ShapeMismatch);
  const auto bad = g.input(Tensor(Shape{3, 1}));
  const Graph::Var mismatched[] = {a, bad};
  CHECK_THROWS_AS(g.concat(mismatched), ShapeMismatch);
}

TEST_CASE("single-layer closed-form gradients") {
  Rng rng(7);
  ParameterSet ps;
  const auto wi = ps.add("w", Shape{3, 4});
  const auto bi = ps.add("b", Shape{3});
  fill_uniform(ps[wi].value, rng);
  fill_uniform(ps[bi].value, rng);
  const Tensor x = random_tensor({5, 4}, rng), t = random_tensor({5, 3}, rng);
  Graph g;
  const auto y = g.linear(g.input(x), g.param(ps[wi]), g.param(ps[bi]));
  g.backward(g.mse(y, g.input(t)));
  const Tensor yv = g.value(y);
  const double scale = 2.0 / 15.0;  // 2 / (N * out)
  for (std::size_t o = 0; o < 3; ++o) {
    double gb = 0.0;
    for (std::size_t n = 0; n < 5; ++n) gb += scale * (yv[n * 3 + o] - t[n * 3 + o]);
    CHECK(ps[bi].grad[o] == doctest::Approx(gb).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i) {
      double gw = 0.0;
      for (std::size_t n = 0; n < 5; ++n) gw += scale * (yv[n * 3 + o] - t[n * 3 + o]) * x[n * 4 + i];
      CHECK(ps[wi].grad[o * 4 + i] == doctest::Approx(gw).epsilon(1e-12));
    }
  }
}

TEST_CASE("unreached parameter gets zero gradient") {
  ParameterSet ps;
  const auto used = ps.add("used", Shape{2});
  const auto unused = ps.add("unused", Shape{2});
  ps[used].value.fill(1.0);
  ps[unused].value.fill(1.0);
  ps[unused].grad.fill(5.0);
  ps.zero_grad();
  Graph g;
  const auto loss = g.mse(g.param(ps[used]), g.input(Tensor(Shape{2})));
  g.backward(loss);
  CHECK(ps[used].grad[0] != 0.0);
  CHECK(ps[unused].grad[0] == 0.0);
  CHECK(ps[unused].grad[1] == 0.0);
}

TEST_CASE("backward accumulates into parameter gradients") {
  ParameterSet ps;
  const auto p = ps.add("p", Shape{1});
  ps[p].value.fill(3.0);
  ps.zero_grad();
  for (int rep = 0; rep < 2; ++rep) {
    Graph g;
    g.backward(g.mse(g.param(ps[p]), g.input(Tensor(Shape{1}))));
  }
  CHECK(ps[p].grad[0] == doctest::Approx(12.0));
}

TEST_CASE("backward requires a scalar loss") {
  ParameterSet ps;
  const auto p = ps.add("p", Shape{2});
  Graph g;
  const auto v = g.relu(g.param(ps[p]));
  CHECK_THROWS_AS(g.backward(v), ShapeMismatch);
}

TEST_CASE("frozen parameters are constants") {
  ParameterSet ps;
  const auto p = ps.add("encoder.w", Shape{2});
  ps[p].value.fill(1.0);
  ps.set_frozen("encoder.", true);
  Graph g;
  const auto v = g.param(ps[p]);
  CHECK_FALSE(g.requires_grad(v));
  // nothing in the graph needs a gradient; backward still leaves zeros
  g.backward(g.mse(v, g.input(Tensor(Shape{2}))));
  CHECK(ps[p].grad[0] == 0.0);
}

TEST_CASE("parameter set bookkeeping") {
  ParameterSet ps;
  ps.add("a", Shape{2, 3});
  ps.add("b.x", Shape{4});
  CHECK_THROWS(ps.add("a", Shape{1}));
  CHECK(ps.contains("b.x"));
  CHECK_FALSE(ps.contains("c"));
  CHECK_THROWS(ps.get("c"));
  CHECK(ps.scalar_count() == 10);
  ps.set_frozen("b.", true);
  CHECK(ps.scalar_count(true) == 6);
  auto snap = ps.snapshot();
  ps.get("a").value.fill(3.0);
  ps.restore(snap);
  CHECK(ps.get("a").value[0] == 0.0);
}

TEST_CASE("finite differences: every layer kind") {
  Rng rng(11);
  ParameterSet ps;
  auto add = [&](const std::string& name, Shape s, bool away = false) {
    const auto i = ps.add(name, std::move(s));
    if (away) fill_away_from_zero(ps[i].value, rng);
    else fill_uniform(ps[i].value, rng);
    return i;
  };
  const auto x2 = add("x2", Shape{3, 5});
  const auto w = add("w", Shape{4, 5});
  const auto b = add("b", Shape{4});
  const auto xr = add("xr", Shape{3, 4}, true);
  const auto x3 = add("x3", Shape{2, 5, 10});
  const auto wc = add("wc", Shape{6, 5});
  const auto bc = add("bc", Shape{6});
  const auto img = add("img", Shape{1, 2, 6, 5});
  const auto wk = add("wk", Shape{3, 2, 3, 3});
  const auto bk = add("bk", Shape{3});
  const Tensor t4 = random_tensor({3, 4}, rng);

  SUBCASE("linear") {
    auto r = check_gradients(ps, [&](Graph& g) {
      return g.mse(g.linear(g.param(ps[x2]), g.param(ps[w]), g.param(ps[b])), g.input(t4));
    }, 20, 1);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
  }
  SUBCASE("relu") {
    auto r = check_gradients(ps, [&](Graph& g) { return g.mse(g.relu(g.param(ps[xr])), g.input(t4)); }, 20, 2);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
  }
  SUBCASE("conv1d_k1 + pool") {
    const Tensor t = random_tensor({2, 6}, rng);
    auto r = check_gradients(ps, [&](Graph& g) {
      const auto h = g.conv1d_k1(g.param(ps[x3]), g.param(ps[wc]), g.param(ps[bc]));
      return g.mse(g.adaptive_avg_pool1d(h), g.input(t));
    }, 20, 3);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
  }
  SUBCASE("conv2d + global pool") {
    const Tensor t = random_tensor({1, 3}, rng);
    auto r = check_gradients(ps, [&](Graph& g) {
      const auto h = g.conv2d(g.param(ps[img]), g.param(ps[wk]), g.param(ps[bk]), 2, 1);
      return g.mse(g.global_avg_pool2d(h), g.input(t));
    }, 20, 4);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
  }
  SUBCASE("concat, reshape, transpose, add, scale") {
    const Tensor t = random_tensor({3, 9}, rng);
    auto r = check_gradients(ps, [&](Graph& g) {
      const Graph::Var parts[] = {g.param(ps[x2]), g.param(ps[xr])};
      const auto c = g.concat(parts);
      const auto tr = g.reshape(g.transpose_last2(g.reshape(c, Shape{1, 3, 9})), Shape{9, 3});
      const auto back = g.reshape(g.transpose_last2(g.reshape(tr, Shape{1, 9, 3})), Shape{3, 9});
      return g.mse(g.add(g.scale(back, 1.7), c), g.input(t));
    }, 20, 5);
    CHECK_MESSAGE(r.max_rel_error < kTol, r.worst);
  }
}
