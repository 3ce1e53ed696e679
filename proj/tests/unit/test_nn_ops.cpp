#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "edgevit/errors.hpp"
#include "edgevit/nn_ops.hpp"
#include "support/oracles.hpp"

using namespace edgevit;
using namespace edgevit::nn;

namespace {

Conv2dParams make_conv(Tensor w, std::int64_t stride, std::int64_t pad, std::int64_t groups,
                       std::optional<Tensor> bias = std::nullopt) {
  Conv2dParams p;
  p.weight = std::move(w);
  p.bias = std::move(bias);
  p.stride_h = p.stride_w = stride;
  p.pad_h = p.pad_w = pad;
  p.groups = groups;
  return p;
}

Conv2dParams random_conv(std::mt19937_64& rng, std::int64_t c, std::int64_t& cout,
                         std::int64_t groups, std::int64_t k, std::int64_t stride,
                         std::int64_t pad) {
  const auto mult = oracle::randint(rng, 1, 2);
  cout = groups * mult * (groups == 1 ? oracle::randint(rng, 1, 4) : 1);
  return make_conv(oracle::random_tensor(rng, {k, k, c / groups, cout}), stride, pad, groups,
                   oracle::random_tensor(rng, {cout}));
}

}  // namespace

TEST_CASE("conv2d examples") {
  SUBCASE("1x1 scalar product") {
    const auto p = make_conv(Tensor({1, 1, 1, 1}, std::vector<float>{3.0f}), 1, 0, 1,
                             Tensor({1}, std::vector<float>{0.0f}));
    CHECK(conv2d(Tensor({1, 1, 1, 1}, std::vector<float>{2.0f}), p)[0] == 6.0f);
  }
  SUBCASE("all-ones 3x3 with padding counts the in-bounds taps") {
    const auto p = make_conv(Tensor::full({3, 3, 1, 1}, 1.0f), 1, 1, 1);
    for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kIm2col}) {
      const Tensor y = conv2d(Tensor::full({1, 3, 3, 1}, 1.0f), p, algo);
      CHECK(y.at(0, 1, 1, 0) == 9.0f);
      CHECK(y.at(0, 0, 0, 0) == 4.0f);
      CHECK(y.at(0, 0, 2, 0) == 4.0f);
      CHECK(y.at(0, 2, 0, 0) == 4.0f);
      CHECK(y.at(0, 2, 2, 0) == 4.0f);
      CHECK(y.at(0, 0, 1, 0) == 6.0f);
    }
  }
  SUBCASE("depthwise channels are independent") {
    const auto p = make_conv(Tensor({1, 1, 1, 2}, std::vector<float>{1.0f, 2.0f}), 1, 0, 2);
    const Tensor y = conv2d(Tensor({1, 1, 1, 2}, std::vector<float>{5.0f, 7.0f}), p);
    CHECK(y[0] == 5.0f);
    CHECK(y[1] == 14.0f);
  }
  SUBCASE("stride-2 2x2 patch embedding output extent") {
    const auto p = make_conv(Tensor({2, 2, 3, 4}), 2, 0, 1);
    CHECK(conv2d(Tensor({1, 8, 6, 3}), p).shape() == Shape{1, 4, 3, 4});
  }
}

TEST_CASE("conv2d error paths") {
  CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4, 3}), make_conv(Tensor({3, 3, 2, 4}), 1, 1, 1)),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4, 4}), make_conv(Tensor({3, 3, 2, 3}), 1, 1, 2)),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2, 1}), make_conv(Tensor({5, 5, 1, 1}), 1, 1, 1)),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2, 1}), make_conv(Tensor({1, 1, 1, 1}), 0, 0, 1)),
                  ConfigError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4, 2}), make_conv(Tensor({3, 3, 1, 2}), 1, 1, 2),
                         ConvAlgo::kIm2col),
                  UnsupportedError);
}

TEST_CASE("conv2d variants match the nested-loop oracle on random shapes") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const auto h = oracle::randint(rng, 1, 9), w = oracle::randint(rng, 1, 9);
    const auto c = oracle::randint(rng, 1, 8);
    const int kind = trial % 3;  // dense, depthwise, pointwise
    const auto k = kind == 2 ? 1 : oracle::randint(rng, 1, std::min<std::int64_t>(3, std::min(h, w)));
    const auto stride = oracle::randint(rng, 1, 2);
    const auto pad = kind == 2 ? 0 : oracle::randint(rng, 0, k / 2);
    std::int64_t cout = 0;
    const auto p = random_conv(rng, c, cout, kind == 1 ? c : 1, k, stride, pad);
    const auto x = oracle::random_tensor(rng, {oracle::randint(rng, 1, 2), h, w, c});
    const auto want = oracle::conv2d(x, p);
    CHECK(max_abs_diff(conv2d(x, p, ConvAlgo::kDirect), want) < 1e-5f);
    if (p.groups == 1) CHECK(max_abs_diff(conv2d(x, p, ConvAlgo::kIm2col), want) < 1e-5f);
  }
}

TEST_CASE("depthwise conv: zeroing an input channel zeroes exactly that output channel") {
  std::mt19937_64 rng(4);
  const std::int64_t c = 5;
  const auto p = make_conv(oracle::random_tensor(rng, {3, 3, 1, c}), 1, 1, c);
  auto x = oracle::random_tensor(rng, {1, 6, 6, c}, 0.1f, 1.0f);
  for (std::int64_t i = 0; i < x.numel(); i += c) x[i + 2] = 0.0f;
  const Tensor y = conv2d(x, p);
  for (std::int64_t i = 0; i < y.numel(); i += c) {
    CHECK(y[i + 2] == 0.0f);
    for (std::int64_t ch : {0, 1, 3, 4}) CHECK(y[i + ch] != 0.0f);
  }
}

TEST_CASE("convolution is translation-equivariant on the interior") {
  std::mt19937_64 rng(6);
  const std::int64_t c = 3;
  for (std::int64_t groups : {std::int64_t{1}, c}) {
    const auto p = make_conv(oracle::random_tensor(rng, {3, 3, c / groups, c}), 1, 1, groups);
    const auto x = oracle::random_tensor(rng, {1, 9, 9, c});
    Tensor shifted({1, 9, 9, c});
    for (std::int64_t i = 1; i < 9; ++i)
      for (std::int64_t j = 1; j < 9; ++j)
        for (std::int64_t ch = 0; ch < c; ++ch) shifted.at(0, i, j, ch) = x.at(0, i - 1, j - 1, ch);
    const Tensor y = conv2d(x, p, ConvAlgo::kDirect);
    const Tensor ys = conv2d(shifted, p, ConvAlgo::kDirect);
    // Interior outputs whose receptive field avoids both the padding and the
    // shifted-in border.
    for (std::int64_t i = 2; i < 8; ++i)
      for (std::int64_t j = 2; j < 8; ++j)
        for (std::int64_t ch = 0; ch < c; ++ch) CHECK(ys.at(0, i, j, ch) == y.at(0, i - 1, j - 1, ch));
  }
}

TEST_CASE("transposed depthwise conv examples") {
  SUBCASE("r = 1 unit kernel is the identity") {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_tensor(rng, {1, 3, 4, 2});
    const Tensor y = transposed_depthwise_conv2d(x, Tensor::full({1, 1, 2}, 1.0f),
                                                 Tensor::zeros({2}), 1);
    CHECK(y.bitwise_equal(x));
  }
  SUBCASE("disjoint 2x2 block") {
    const Tensor y = transposed_depthwise_conv2d(Tensor({1, 1, 1, 1}, std::vector<float>{3.0f}),
                                                 Tensor({2, 2, 1}, std::vector<float>{1, 2, 3, 4}),
                                                 std::nullopt, 2);
    CHECK(std::vector<float>(y.data().begin(), y.data().end()) == std::vector<float>{3, 6, 9, 12});
  }
  SUBCASE("output shape arithmetic") {
    CHECK(transposed_depthwise_conv2d(Tensor({1, 7, 5, 3}), Tensor({2, 2, 3}), std::nullopt, 2)
              .shape() == Shape{1, 14, 10, 3});
  }
  SUBCASE("kernel != stride is unsupported") {
    CHECK_THROWS_AS(transposed_depthwise_conv2d(Tensor({1, 2, 2, 1}), Tensor({3, 3, 1}),
                                                std::nullopt, 2),
                    UnsupportedError);
  }
}

TEST_CASE("transposed depthwise conv matches the scatter oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto r = oracle::randint(rng, 1, 4);
    const auto c = oracle::randint(rng, 1, 8);
    const auto x = oracle::random_tensor(rng, {1, oracle::randint(rng, 1, 5), oracle::randint(rng, 1, 5), c});
    const auto w = oracle::random_tensor(rng, {r, r, c});
    const auto b = oracle::random_tensor(rng, {c});
    CHECK(max_abs_diff(transposed_depthwise_conv2d(x, w, b, r),
                       oracle::transposed_depthwise(x, w, b, r)) < 1e-5f);
  }
}

TEST_CASE("layer_norm examples and properties") {
  SUBCASE("constant channels normalize to zero") {
    const LayerNormParams p{Tensor::full({4}, 1.0f), Tensor::zeros({4}), 1e-6f};
    const Tensor y = layer_norm(Tensor::full({1, 2, 2, 4}, 3.5f), p);
    for (float v : y.data()) CHECK(v == 0.0f);
  }
  SUBCASE("[1,-1] has mean 0 and variance 1") {
    const LayerNormParams p{Tensor::full({2}, 1.0f), Tensor::zeros({2}), 1e-12f};
    const Tensor y = layer_norm(Tensor({1, 1, 1, 2}, std::vector<float>{1.0f, -1.0f}), p);
    CHECK(y[0] == doctest::Approx(1.0f).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(-1.0f).epsilon(1e-6));
  }
  SUBCASE("gamma zero collapses to beta") {
    std::mt19937_64 rng(9);
    const LayerNormParams p{Tensor::zeros({3}), Tensor({3}, std::vector<float>{0.5f, -1.0f, 2.0f}), 1e-6f};
    const Tensor y = layer_norm(oracle::random_tensor(rng, {1, 2, 3, 3}), p);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == p.beta[i % 3]);
  }
  SUBCASE("per-token statistics on random inputs") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = oracle::randint(rng, 8, 32);
      const LayerNormParams p{Tensor::full({c}, 1.0f), Tensor::zeros({c}), 1e-6f};
      const Tensor y = layer_norm(oracle::random_tensor(rng, {1, 3, 3, c}), p);
      for (std::int64_t t = 0; t < 9; ++t) {
        double mean = 0.0, var = 0.0;
        for (std::int64_t i = 0; i < c; ++i) mean += y[t * c + i];
        mean /= static_cast<double>(c);
        for (std::int64_t i = 0; i < c; ++i) var += (y[t * c + i] - mean) * (y[t * c + i] - mean);
        var /= static_cast<double>(c);
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(std::fabs(var - 1.0) < 1e-4);
      }
    }
  }
  CHECK_THROWS_AS(layer_norm(Tensor({1, 1, 1, 3}),
                             LayerNormParams{Tensor({2}), Tensor({2}), 1e-6f}),
                  DimensionError);
}

TEST_CASE("gelu uses the exact erf form") {
  CHECK(gelu(0.0f) == 0.0f);
  CHECK(std::fabs(gelu(10.0f) - 10.0f) < 1e-6f);
  CHECK(std::fabs(gelu(-10.0f)) < 1e-6f);
  // The tanh approximation is ~1e-4 off here.
  CHECK(std::fabs(gelu(1.5f) - static_cast<float>(oracle::gelu(1.5))) < 1e-6f);
}

TEST_CASE("softmax examples and properties") {
  const Tensor u = softmax(Tensor::full({1, 5}, 2.0f));
  for (float v : u.data()) CHECK(v == doctest::Approx(0.2f));
  const Tensor t = softmax(Tensor({2}, std::vector<float>{0.0f, std::log(3.0f)}));
  CHECK(t[0] == doctest::Approx(0.25f).epsilon(1e-6));
  CHECK(t[1] == doctest::Approx(0.75f).epsilon(1e-6));

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = oracle::randint(rng, 1, 40);
    const auto x = oracle::random_tensor(rng, {3, n}, -5.0f, 5.0f);
    const Tensor y = softmax(x);
    const Tensor shifted = softmax(map(x, [](float v) { return v + 7.0f; }));
    CHECK(max_abs_diff(y, shifted) < 1e-6f);
    CHECK(max_abs_diff(y, oracle::softmax(x)) < 1e-6f);
    for (std::int64_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        CHECK(y.at(r, i) > 0.0f);
        CHECK(y.at(r, i) <= 1.0f);
        s += y.at(r, i);
      }
      CHECK(std::fabs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("linear examples") {
  std::mt19937_64 rng(13);
  const auto x = oracle::random_tensor(rng, {1, 2, 2, 3});
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  CHECK(linear(x, eye, Tensor::zeros({3})).bitwise_equal(x));

  const Tensor y = linear(Tensor({3}, std::vector<float>{1, 2, 3}), Tensor::full({3, 4}, 1.0f),
                          std::nullopt);
  for (float v : y.data()) CHECK(v == 6.0f);

  const auto a = oracle::random_tensor(rng, {3, 5});
  const auto b = oracle::random_tensor(rng, {5, 2});
  CHECK(max_abs_diff(linear(linear(x, a, std::nullopt), b, std::nullopt),
                     linear(x, matmul(a, b), std::nullopt)) < 1e-5f);
  CHECK_THROWS_AS(linear(x, Tensor({4, 2}), std::nullopt), DimensionError);
}

TEST_CASE("mhsa examples") {
  std::mt19937_64 rng(14);
  SUBCASE("single token: output is (x Wv + bv) Wo + bo") {
    const auto p = oracle::random_attn(rng, 6, 2);
    const auto tok = oracle::random_tensor(rng, {1, 6});
    const Tensor want = linear(linear(tok, p.wv, p.bv), p.wo, p.bo);
    CHECK(max_abs_diff(mhsa(tok, p), want) < 1e-6f);
  }
  SUBCASE("two identical tokens with identity projections") {
    AttnParams p;
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
    p.wq = p.wk = p.wv = p.wo = eye;
    p.heads = 1;
    const Tensor toks = Tensor::matrix({{0.5f, -1.0f, 2.0f}, {0.5f, -1.0f, 2.0f}});
    CHECK(max_abs_diff(mhsa(toks, p), toks) < 1e-6f);
  }
  SUBCASE("permuting tokens permutes outputs") {
    const auto p = oracle::random_attn(rng, 8, 4);
    const auto toks = oracle::random_tensor(rng, {5, 8});
    const std::vector<std::int64_t> perm{3, 0, 4, 1, 2};
    Tensor permuted({5, 8});
    for (std::int64_t i = 0; i < 5; ++i)
      for (std::int64_t c = 0; c < 8; ++c) permuted.at(i, c) = toks.at(perm[static_cast<std::size_t>(i)], c);
    const Tensor y = mhsa(toks, p);
    const Tensor yp = mhsa(permuted, p);
    for (std::int64_t i = 0; i < 5; ++i)
      for (std::int64_t c = 0; c < 8; ++c)
        CHECK(std::fabs(yp.at(i, c) - y.at(perm[static_cast<std::size_t>(i)], c)) < 1e-6f);
  }
  SUBCASE("head divisibility") {
    auto p = oracle::random_attn(rng, 6, 1);
    p.heads = 4;
    CHECK_THROWS_AS(mhsa(oracle::random_tensor(rng, {2, 6}), p), DimensionError);
  }
  SUBCASE("random draws match the double-precision oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = oracle::randint(rng, 1, 16);
      const auto p = oracle::random_attn(rng, c, oracle::random_heads(rng, c));
      const auto q = oracle::random_tensor(rng, {oracle::randint(rng, 1, 12), c});
      const auto kv = oracle::random_tensor(rng, {oracle::randint(rng, 1, 12), c});
      CHECK(max_abs_diff(attention(q, kv, p), oracle::attention(q, kv, p)) < 1e-5f);
    }
  }
}

TEST_CASE("bilinear upsample") {
  SUBCASE("constant grid stays constant") {
    const Tensor y = bilinear_upsample(Tensor::full({1, 3, 2, 2}, 1.25f), 2);
    CHECK(y.shape() == Shape{1, 6, 4, 2});
    for (float v : y.data()) CHECK(v == 1.25f);
  }
  SUBCASE("half-pixel convention on a 1-D ramp") {
    const Tensor y = bilinear_upsample(Tensor({1, 1, 2, 1}, std::vector<float>{0.0f, 1.0f}), 2);
    // source x = (j + 0.5)/2 - 0.5 -> -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped)
    const std::vector<float> want{0.0f, 0.25f, 0.75f, 1.0f};
    REQUIRE(y.shape() == Shape{1, 2, 4, 1});
    for (std::int64_t i = 0; i < 8; ++i) CHECK(y[i] == want[static_cast<std::size_t>(i % 4)]);
  }
  SUBCASE("matches the oracle") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = oracle::random_tensor(
          rng, {1, oracle::randint(rng, 1, 5), oracle::randint(rng, 1, 5), oracle::randint(rng, 1, 4)});
      const auto r = oracle::randint(rng, 1, 4);
      CHECK(max_abs_diff(bilinear_upsample(x, r), oracle::bilinear(x, r)) < 1e-5f);
    }
  }
}
