#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oneshot/graph.hpp"
#include "oneshot/optim.hpp"
#include "oneshot/rng.hpp"

using namespace oneshot;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Sum-of-elements "loss" head so any op output can be gradient-checked.
int sum_all(Graph& g, int x) {
  const int64_t n = g.value(x).size();
  return g.mean_all(g.affine(x, static_cast<float>(n), 0.0f));
}

}  // namespace

TEST_CASE("grad_check: dense layer passes at 1e-3") {
  Rng rng(11);
  ParamSet ps;
  ps.add("x", random_tensor(rng, {7}));
  ps.add("w", random_tensor(rng, {4, 7}));
  ps.add("b", random_tensor(rng, {4}));
  auto f = [&](bool fill) {
    Graph g;
    int x = g.leaf(ps.get("x").value, true);
    int w = g.leaf(ps.get("w").value, true);
    int b = g.leaf(ps.get("b").value, true);
    int y = g.dense(x, w, b);
    int loss = g.mean_all(g.activation(y, kernels::Act::tanh));
    if (fill) {
      g.backward(loss);
      ps.get("x").grad = g.grad(x);
      ps.get("w").grad = g.grad(w);
      ps.get("b").grad = g.grad(b);
    }
    return g.value(loss)[0];
  };
  auto report = grad_check(ps, f);
  CHECK(report.pass);
  CHECK(report.checked > 0);
}

TEST_CASE("grad_check: tanh derivative at zero is 1") {
  ParamSet ps;
  ps.add("x", Tensor({1}, {0.0f}));
  auto f = [&](bool fill) {
    Graph g;
    int x = g.leaf(ps.get("x").value, true);
    int y = g.tanh_act(x);
    if (fill) {
      g.backward(y);
      ps.get("x").grad = g.grad(x);
    }
    return g.value(y)[0];
  };
  f(true);
  CHECK(ps.get("x").grad[0] == doctest::Approx(1.0f).epsilon(1e-6));
  auto report = grad_check(ps, f);
  CHECK(report.pass);
}

TEST_CASE("bce gradient at p=0.5, y=1 is -2") {
  ParamSet ps;
  ps.add("p", Tensor({1}, {0.5f}));
  auto f = [&](bool fill) {
    Graph g;
    int p = g.leaf(ps.get("p").value, true);
    int loss = g.bce(p, Tensor({1}, {1.0f}));
    if (fill) {
      g.backward(loss);
      ps.get("p").grad = g.grad(p);
    }
    return g.value(loss)[0];
  };
  f(true);
  CHECK(ps.get("p").grad[0] == doctest::Approx(-2.0f).epsilon(1e-4));
  auto report = grad_check(ps, f);
  CHECK(report.pass);
}

TEST_CASE("grad_check: composite conv-pool-dense-sigmoid-bce graph") {
  Rng rng(12);
  ParamSet ps;
  ps.add("x", random_tensor(rng, {2, 6, 8}));
  ps.add("k", random_tensor(rng, {3, 2, 3, 3}, -0.5f, 0.5f));
  ps.add("kb", random_tensor(rng, {3}, -0.1f, 0.1f));
  ps.add("w", random_tensor(rng, {1, 3 * 3 * 4}, -0.3f, 0.3f));
  ps.add("b", random_tensor(rng, {1}, -0.1f, 0.1f));
  auto f = [&](bool fill) {
    Graph g;
    int x = g.leaf(ps.get("x").value, true);
    int k = g.leaf(ps.get("k").value, true);
    int kb = g.leaf(ps.get("kb").value, true);
    int w = g.leaf(ps.get("w").value, true);
    int b = g.leaf(ps.get("b").value, true);
    int c = g.conv2d(x, k, kb);
    int p = g.maxpool2x2(c);
    int flat = g.reshape(p, {3 * 3 * 4});
    int logit = g.dense(flat, w, b);
    int prob = g.sigmoid(logit);
    int loss = g.bce(prob, Tensor({1}, {1.0f}));
    if (fill) {
      g.backward(loss);
      ps.get("x").grad = g.grad(x);
      ps.get("k").grad = g.grad(k);
      ps.get("kb").grad = g.grad(kb);
      ps.get("w").grad = g.grad(w);
      ps.get("b").grad = g.grad(b);
    }
    return g.value(loss)[0];
  };
  auto report = grad_check(ps, f, 1e-3f, 1e-3f, 40);
  CHECK(report.pass);
  CHECK(report.checked > 50);
}

TEST_CASE("grad_check: lstm through time") {
  Rng rng(13);
  const int t_len = 4, din = 3, hh = 2;
  ParamSet ps;
  ps.add("x", random_tensor(rng, {t_len, din}));
  ps.add("wih", random_tensor(rng, {4 * hh, din}, -0.5f, 0.5f));
  ps.add("whh", random_tensor(rng, {4 * hh, hh}, -0.5f, 0.5f));
  ps.add("b", random_tensor(rng, {4 * hh}, -0.2f, 0.2f));
  auto f = [&](bool fill) {
    Graph g;
    int x = g.leaf(ps.get("x").value, true);
    int wih = g.leaf(ps.get("wih").value, true);
    int whh = g.leaf(ps.get("whh").value, true);
    int b = g.leaf(ps.get("b").value, true);
    int hs = g.lstm(x, wih, whh, b);
    int loss = sum_all(g, hs);
    if (fill) {
      g.backward(loss);
      ps.get("x").grad = g.grad(x);
      ps.get("wih").grad = g.grad(wih);
      ps.get("whh").grad = g.grad(whh);
      ps.get("b").grad = g.grad(b);
    }
    return g.value(loss)[0];
  };
  auto report = grad_check(ps, f);
  CHECK(report.pass);
}

TEST_CASE("grad_check: batchnorm train mode") {
  Rng rng(14);
  ParamSet ps;
  ps.add("x", random_tensor(rng, {3, 2, 2, 3}));
  ps.add("gamma", random_tensor(rng, {2}, 0.5f, 1.5f));
  ps.add("beta", random_tensor(rng, {2}, -0.5f, 0.5f));
  auto f = [&](bool fill) {
    Graph g;
    BnRunning running = BnRunning::init(2);  // fresh each call: stats are a side effect
    int x = g.leaf(ps.get("x").value, true);
    int gamma = g.leaf(ps.get("gamma").value, true);
    int beta = g.leaf(ps.get("beta").value, true);
    int y = g.batchnorm2d(x, gamma, beta, running, BnMode::train);
    int act = g.tanh_act(y);
    int loss = g.mean_all(act);
    if (fill) {
      g.backward(loss);
      ps.get("x").grad = g.grad(x);
      ps.get("gamma").grad = g.grad(gamma);
      ps.get("beta").grad = g.grad(beta);
    }
    return g.value(loss)[0];
  };
  auto report = grad_check(ps, f);
  CHECK(report.pass);
}

TEST_CASE("grad_check: similarity metrics") {
  Rng rng(15);
  for (const char* spec_text : {"l1.cross+l2.cross", "diff", "absdiff", "sqdiff", "l1", "l2", "cossim",
                                "cossim.cross"}) {
    CAPTURE(spec_text);
    SimilaritySpec spec = SimilaritySpec::parse(spec_text);
    ParamSet ps;
    ps.add("ref", random_tensor(rng, {3, 4}));
    ps.add("test", random_tensor(rng, {3, 4}));
    auto f = [&](bool fill) {
      Graph g;
      int r = g.leaf(ps.get("ref").value, true);
      int t = g.leaf(ps.get("test").value, true);
      int s = g.similarity(r, t, spec);
      int loss = g.mean_all(g.tanh_act(s));
      if (fill) {
        g.backward(loss);
        ps.get("ref").grad = g.grad(r);
        ps.get("test").grad = g.grad(t);
      }
      return g.value(loss)[0];
    };
    auto report = grad_check(ps, f, 2e-3f);
    CHECK(report.pass);
  }
}

TEST_CASE("loss independent of a parameter leaves its gradient exactly zero") {
  Rng rng(16);
  Graph g;
  int used = g.leaf(random_tensor(rng, {3}), true);
  int unused = g.leaf(random_tensor(rng, {3}), true);
  int loss = g.mean_all(g.tanh_act(used));
  g.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(g.grad(unused)[i] == 0.0f);
}

TEST_CASE("backward is bit-deterministic across repeated runs") {
  Rng rng(17);
  Tensor x = random_tensor(rng, {2, 6, 8});
  Tensor k = random_tensor(rng, {3, 2, 3, 3});
  Tensor kb = random_tensor(rng, {3});
  auto run = [&]() {
    Graph g;
    int xn = g.leaf(x, true);
    int kn = g.leaf(k, true);
    int bn = g.leaf(kb, true);
    int c = g.conv2d(xn, kn, bn);
    int loss = g.mean_all(g.tanh_act(c));
    g.backward(loss);
    return std::pair<Tensor, Tensor>(g.grad(kn), g.grad(xn));
  };
  auto [gk1, gx1] = run();
  auto [gk2, gx2] = run();
  for (int64_t i = 0; i < gk1.size(); ++i) REQUIRE(gk1[i] == gk2[i]);
  for (int64_t i = 0; i < gx1.size(); ++i) REQUIRE(gx1[i] == gx2[i]);
}

TEST_CASE("backward rejects non-scalar targets and foreign nodes") {
  Graph g;
  int x = g.leaf(Tensor({2}, {1, 2}), true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
  CHECK_THROWS_AS(g.backward(99), std::invalid_argument);
}

TEST_CASE("grad_check flags a corrupted backward (negative control)") {
  Rng rng(18);
  ParamSet ps;
  ps.add("x", random_tensor(rng, {5}));
  auto f = [&](bool fill) {
    Graph g;
    int x = g.leaf(ps.get("x").value, true);
    int y = g.tanh_act(x);
    int loss = g.mean_all(y);
    if (fill) {
      g.backward(loss);
      Tensor corrupted = g.grad(x);
      for (int64_t i = 0; i < corrupted.size(); ++i) corrupted[i] = corrupted[i] * 1.5f + 0.2f;
      ps.get("x").grad = corrupted;
    }
    return g.value(loss)[0];
  };
  auto report = grad_check(ps, f);
  CHECK_FALSE(report.pass);
  CHECK_FALSE(report.failures.empty());
}

TEST_CASE("optimizer_step") {
  SUBCASE("sgd with zero gradient leaves parameters unchanged") {
    ParamSet ps;
    ps.add("w", Tensor({2}, {1.5f, -2.0f}));
    int64_t step = 0;
    OptConfig cfg;
    cfg.kind = OptKind::sgd;
    cfg.lr = 0.1f;
    optimizer_step(ps, cfg, step);
    CHECK(ps.get("w").value[0] == 1.5f);
    CHECK(ps.get("w").value[1] == -2.0f);
  }
  SUBCASE("sgd update rule") {
    ParamSet ps;
    ps.add("w", Tensor({1}, {1.0f}));
    ps.get("w").grad[0] = 2.0f;
    int64_t step = 0;
    OptConfig cfg;
    cfg.kind = OptKind::sgd;
    cfg.lr = 0.1f;
    optimizer_step(ps, cfg, step);
    CHECK(ps.get("w").value[0] == doctest::Approx(0.8f));
  }
  SUBCASE("adam first step moves by about -lr * sign(g)") {
    ParamSet ps;
    ps.add("w", Tensor({1}, {1.0f}));
    ps.get("w").grad[0] = 0.37f;
    int64_t step = 0;
    OptConfig cfg;
    cfg.kind = OptKind::adam;
    cfg.lr = 0.01f;
    optimizer_step(ps, cfg, step);
    // bias-corrected first step: m_hat = g, v_hat = g^2 -> update = lr*g/(|g|+eps)
    CHECK(ps.get("w").value[0] == doctest::Approx(1.0f - 0.01f).epsilon(1e-3));
    CHECK(step == 1);
  }
  SUBCASE("NaN gradient rejected with the parameter name") {
    ParamSet ps;
    ps.add("w.bad", Tensor({1}, {1.0f}));
    ps.get("w.bad").grad[0] = std::numeric_limits<float>::quiet_NaN();
    int64_t step = 0;
    OptConfig cfg;
    CHECK_THROWS_WITH_AS(optimizer_step(ps, cfg, step), doctest::Contains("w.bad"), std::invalid_argument);
  }
}

TEST_CASE("seeded initializers are reproducible") {
  Rng a(42), b(42);
  Tensor ta = kaiming_uniform(a, {4, 9}, 9);
  Tensor tb = kaiming_uniform(b, {4, 9}, 9);
  for (int64_t i = 0; i < ta.size(); ++i) REQUIRE(ta[i] == tb[i]);
}
