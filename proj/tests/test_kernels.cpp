#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oneshot/kernels.hpp"
#include "oneshot/rng.hpp"

using namespace oneshot;
using namespace oneshot::kernels;

namespace {

// Independent nested-loop convolution: per output pixel the sum runs over
// kernel row, then kernel column, then input channel, fma steps. The
// production kernel must match this bit for bit.
Tensor conv_oracle(const Tensor& x, const Tensor& k, const Tensor& b) {
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = k.dim(0);
  Tensor y({co, h, w});
  for (int o = 0; o < co; ++o)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        float acc = b[o];
        for (int kr = 0; kr < 3; ++kr)
          for (int kc = 0; kc < 3; ++kc)
            for (int ch = 0; ch < ci; ++ch) {
              const int ir = r + kr - 1, ic = c + kc - 1;
              if (ir < 0 || ir >= h || ic < 0 || ic >= w) continue;
              acc = std::fma(k.at({o, ch, kr, kc}), x.at({ch, ir, ic}), acc);
            }
        y.at({o, r, c}) = acc;
      }
  return y;
}

Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("conv2d: zero input gives zero output") {
  Rng rng(1);
  Tensor x = Tensor::zeros({3, 5, 7});
  Tensor k = random_tensor(rng, {4, 3, 3, 3});
  Tensor b = Tensor::zeros({4});
  Tensor y = conv2d_forward(x, k, b);
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("conv2d: center delta kernel sums input channels") {
  Rng rng(2);
  Tensor x = random_tensor(rng, {3, 6, 5});
  Tensor k = Tensor::zeros({1, 3, 3, 3});
  for (int c = 0; c < 3; ++c) k.at({0, c, 1, 1}) = 1.0f;
  Tensor y = conv2d_forward(x, k, Tensor::zeros({1}));
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 5; ++c) {
      float want = 0.0f;
      for (int ch = 0; ch < 3; ++ch) want = std::fma(1.0f, x.at({ch, r, c}), want);
      CHECK(y.at({0, r, c}) == want);
    }
}

TEST_CASE("conv2d matches the brute-force oracle exactly") {
  Rng rng(3);
  SUBCASE("1x4x4 single kernel") {
    Tensor x = random_tensor(rng, {1, 4, 4});
    Tensor k = random_tensor(rng, {1, 1, 3, 3});
    Tensor b = random_tensor(rng, {1});
    Tensor y = conv2d_forward(x, k, b);
    Tensor want = conv_oracle(x, k, b);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == want[i]);
  }
  SUBCASE("random shapes, tails and multiples of 16") {
    for (int trial = 0; trial < 8; ++trial) {
      const int ci = 1 + rng.below(7), co = 1 + rng.below(9);
      const int h = 2 + rng.below(9), w = 2 + rng.below(37);
      Tensor x = random_tensor(rng, {ci, h, w});
      Tensor k = random_tensor(rng, {co, ci, 3, 3});
      Tensor b = random_tensor(rng, {co});
      Tensor y = conv2d_forward(x, k, b);
      Tensor want = conv_oracle(x, k, b);
      REQUIRE(y.size() == want.size());
      for (int64_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == want[i]);
    }
  }
  SUBCASE("batched input equals per-image calls") {
    Tensor x = random_tensor(rng, {2, 3, 5, 20});
    Tensor k = random_tensor(rng, {4, 3, 3, 3});
    Tensor b = random_tensor(rng, {4});
    Tensor y = conv2d_forward(x, k, b);
    for (int n = 0; n < 2; ++n) {
      Tensor xi({3, 5, 20});
      for (int64_t i = 0; i < xi.size(); ++i) xi[i] = x[n * xi.size() + i];
      Tensor yi = conv2d_forward(xi, k, b);
      for (int64_t i = 0; i < yi.size(); ++i) CHECK(y[n * yi.size() + i] == yi[i]);
    }
  }
}

TEST_CASE("conv2d rejects shape mismatches with a diagnostic") {
  Tensor x = Tensor::zeros({3, 4, 4});
  CHECK_THROWS_WITH_AS(conv2d_forward(x, Tensor::zeros({2, 3, 5, 5}), Tensor::zeros({2})),
                       doctest::Contains("3x3"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(conv2d_forward(x, Tensor::zeros({2, 4, 3, 3}), Tensor::zeros({2})),
                       doctest::Contains("input channels"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(conv2d_forward(x, Tensor::zeros({2, 3, 3, 3}), Tensor::zeros({3})),
                       doctest::Contains("bias"), std::invalid_argument);
}

TEST_CASE("maxpool2x2") {
  SUBCASE("constant tensor keeps the constant at half size") {
    Tensor x = Tensor::full({2, 4, 6}, 3.25f);
    std::vector<int32_t> am;
    Tensor y = maxpool2x2_forward(x, am);
    CHECK(y.shape() == std::vector<int>{2, 2, 3});
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 3.25f);
  }
  SUBCASE("window max") {
    Tensor x({1, 2, 2}, {1, 2, 3, 4});
    std::vector<int32_t> am;
    Tensor y = maxpool2x2_forward(x, am);
    CHECK(y.size() == 1);
    CHECK(y[0] == 4.0f);
  }
  SUBCASE("floor-mode output shape on the production image size") {
    Tensor x = Tensor::zeros({64, 47, 84});
    std::vector<int32_t> am;
    CHECK(maxpool2x2_forward(x, am).shape() == std::vector<int>{64, 23, 42});
  }
  SUBCASE("ties route the gradient to the first element in scan order") {
    Tensor x({1, 2, 2}, {7, 7, 7, 7});
    std::vector<int32_t> am;
    maxpool2x2_forward(x, am);
    CHECK(am[0] == 0);
  }
  SUBCASE("tiny spatial size rejected") {
    std::vector<int32_t> am;
    CHECK_THROWS_AS(maxpool2x2_forward(Tensor::zeros({1, 1, 4}), am), std::invalid_argument);
  }
}

TEST_CASE("batchnorm") {
  Rng rng(4);
  SUBCASE("identity on already-normalized data") {
    // Two samples, symmetric around 0 with variance 1 per channel.
    Tensor x({2, 1, 1, 2}, {-1, 1, 1, -1});
    Tensor gamma = Tensor::full({1}, 1.0f);
    Tensor beta = Tensor::zeros({1});
    Tensor rm = Tensor::zeros({1}), rv = Tensor::full({1}, 1.0f);
    BnSaved saved;
    Tensor y = bn_forward_train(x, gamma, beta, rm, rv, 0.1f, 1e-5f, saved);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y[i] - x[i]) < 1e-4f);
  }
  SUBCASE("infer mode with input equal to running mean gives beta") {
    Tensor x = Tensor::full({2, 3, 4}, 0.75f);
    Tensor gamma = random_tensor(rng, {2});
    Tensor beta({2}, {0.5f, -1.5f});
    Tensor rm = Tensor::full({2}, 0.75f);
    Tensor rv = Tensor::full({2}, 2.0f);
    Tensor y = bn_forward_infer(x, gamma, beta, rm, rv, 1e-5f);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 12; ++i) CHECK(y[c * 12 + i] == doctest::Approx(beta[c]).epsilon(1e-6));
  }
  SUBCASE("train-mode output has zero batch mean per channel") {
    Tensor x = random_tensor(rng, {4, 3, 2, 5});
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});
    Tensor rm = Tensor::zeros({3}), rv = Tensor::full({3}, 1.0f);
    BnSaved saved;
    Tensor y = bn_forward_train(x, gamma, beta, rm, rv, 0.1f, 1e-5f, saved);
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 10; ++i) mean += y[(n * 3 + c) * 10 + i];
      CHECK(std::fabs(mean / 40.0) < 1e-5);
    }
  }
  SUBCASE("train mode rejects batch size 1") {
    Tensor rm = Tensor::zeros({1}), rv = Tensor::full({1}, 1.0f);
    BnSaved saved;
    CHECK_THROWS_AS(bn_forward_train(Tensor::zeros({1, 1, 2, 2}), Tensor::full({1}, 1.0f), Tensor::zeros({1}), rm,
                                     rv, 0.1f, 1e-5f, saved),
                    std::invalid_argument);
  }
}

TEST_CASE("dense") {
  SUBCASE("identity") {
    Tensor x({3}, {1, -2, 0.5f});
    Tensor w({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor y = dense_forward(x, w, Tensor::zeros({3}));
    for (int i = 0; i < 3; ++i) CHECK(y[i] == x[i]);
  }
  SUBCASE("hand case") {
    Tensor x({2}, {1, 2});
    Tensor w({2, 2}, {1, 1, 0, 1});
    Tensor b({2}, {0, 1});
    Tensor y = dense_forward(x, w, b);
    CHECK(y[0] == 3.0f);
    CHECK(y[1] == 3.0f);
  }
  SUBCASE("shape mismatch rejected") {
    CHECK_THROWS_AS(dense_forward(Tensor::zeros({3}), Tensor::zeros({2, 4}), Tensor::zeros({2})),
                    std::invalid_argument);
  }
}

TEST_CASE("activations") {
  Tensor x({4}, {-1.0f, 2.0f, 0.0f, 20.0f});
  Tensor r = act_forward(x, Act::relu);
  CHECK(r[0] == 0.0f);
  CHECK(r[1] == 2.0f);
  Tensor s = act_forward(x, Act::sigmoid);
  CHECK(s[2] == 0.5f);
  // strictly inside (0,1), including saturated inputs
  for (int i = 0; i < 4; ++i) {
    CHECK(s[i] > 0.0f);
    CHECK(s[i] < 1.0f);
  }
  Tensor extreme({2}, {1000.0f, -1000.0f});
  Tensor se = act_forward(extreme, Act::sigmoid);
  CHECK(se[0] < 1.0f);
  CHECK(se[1] > 0.0f);
}

TEST_CASE("lstm") {
  SUBCASE("all-zero parameters give exactly zero hidden states") {
    Tensor x({4, 3}, {1, 2, 3, -1, -2, -3, 0.5f, 0, 1, 2, 2, 2});
    LstmCache cache;
    Tensor hs = lstm_forward(x, Tensor::zeros({8, 3}), Tensor::zeros({8, 2}), Tensor::zeros({8}), cache);
    CHECK(hs.shape() == std::vector<int>{4, 2});
    for (int64_t i = 0; i < hs.size(); ++i) CHECK(hs[i] == 0.0f);
  }
  SUBCASE("T=1 equals a single cell-step evaluation") {
    Rng rng(5);
    const int din = 3, hh = 2;
    Tensor x = random_tensor(rng, {1, din});
    Tensor wih = random_tensor(rng, {4 * hh, din});
    Tensor whh = random_tensor(rng, {4 * hh, hh});
    Tensor b = random_tensor(rng, {4 * hh});
    LstmCache cache;
    Tensor hs = lstm_forward(x, wih, whh, b, cache);
    for (int i = 0; i < hh; ++i) {
      float pre[4];
      for (int gate = 0; gate < 4; ++gate) {
        float acc = b[gate * hh + i];
        for (int j = 0; j < din; ++j) acc = std::fma(wih.at({gate * hh + i, j}), x[j], acc);
        pre[gate] = acc;  // zero initial hidden: recurrent term vanishes
      }
      const float gi = 1.0f / (1.0f + std::exp(-pre[0]));
      const float gf = 1.0f / (1.0f + std::exp(-pre[1]));
      const float gg = std::tanh(pre[2]);
      const float go = 1.0f / (1.0f + std::exp(-pre[3]));
      (void)gf;
      const float c = gi * gg;
      CHECK(hs[i] == doctest::Approx(go * std::tanh(c)).epsilon(1e-6));
    }
  }
  SUBCASE("empty sequence rejected") {
    LstmCache cache;
    CHECK_THROWS_AS(lstm_forward(Tensor::zeros({0, 3}), Tensor::zeros({8, 3}), Tensor::zeros({8, 2}),
                                 Tensor::zeros({8}), cache),
                    std::invalid_argument);
  }
}

TEST_CASE("bce") {
  SUBCASE("p=0.5 gives ln 2 for either label") {
    Tensor p({1}, {0.5f});
    CHECK(bce_forward(p, Tensor({1}, {1.0f})) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(bce_forward(p, Tensor({1}, {0.0f})) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  SUBCASE("near-perfect prediction gives near-zero loss") {
    Tensor p({1}, {1.0f - 1e-7f});
    CHECK(bce_forward(p, Tensor({1}, {1.0f})) < 1e-6f);
    CHECK(bce_forward(p, Tensor({1}, {1.0f})) >= 0.0f);
  }
  SUBCASE("labels outside {0,1} rejected") {
    Tensor p({1}, {0.5f});
    CHECK_THROWS_AS(bce_forward(p, Tensor({1}, {0.5f})), std::invalid_argument);
  }
  SUBCASE("finite for clamped extremes") {
    Tensor p({2}, {0.0f, 1.0f});
    Tensor y({2}, {1.0f, 0.0f});
    CHECK(std::isfinite(bce_forward(p, y)));
  }
}

TEST_CASE("forward ops are pure: repeated calls bit-identical") {
  Rng rng(6);
  Tensor x = random_tensor(rng, {3, 9, 13});
  Tensor k = random_tensor(rng, {5, 3, 3, 3});
  Tensor b = random_tensor(rng, {5});
  Tensor y1 = conv2d_forward(x, k, b);
  Tensor y2 = conv2d_forward(x, k, b);
  for (int64_t i = 0; i < y1.size(); ++i) REQUIRE(y1[i] == y2[i]);
  CHECK(y1.all_finite());
}
