#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "slt/attention.hpp"
#include "slt/error.hpp"
#include "slt/ops.hpp"
#include "slt/posenc2d.hpp"
#include "test_util.hpp"

namespace slt {
namespace {

using testing::random_tensor;

void expect_rows_stochastic(const Tensor& a) {
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = a.data()[r * cols + c];
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0 + 1e-12);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

// Moves spatial position p of every frame to position perm[p].
Tensor permute_positions(const Tensor& maps, const std::vector<std::size_t>& perm) {
  const std::size_t t = maps.dim(0), c = maps.dim(1), hw = maps.dim(2) * maps.dim(3);
  std::vector<double> out(maps.numel());
  for (std::size_t f = 0; f < t * c; ++f) {
    for (std::size_t p = 0; p < hw; ++p) out[f * hw + perm[p]] = maps.data()[f * hw + p];
  }
  return Tensor::from(maps.shape(), out);
}

double max_abs(const Tensor& a) {
  double m = 0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

TEST(Attention2D, GammaZeroIsExactIdentity) {
  ParamStore store(1);
  Attention2D attn(store, "a", 16);
  Rng rng(2, "t");
  auto f = random_tensor(rng, {3, 16, 4, 4});
  EXPECT_EQ(attn.forward(f).maps.values(), f.values());
}

TEST(Attention2D, KeyChannelsAreAnEighth) {
  ParamStore store(1);
  EXPECT_EQ(Attention2D(store, "a", 16).key_channels(), 2u);
  EXPECT_EQ(Attention2D(store, "b", 4).key_channels(), 1u);
  EXPECT_EQ(store.param("a.query.kernel").shape(), (Shape{2, 16, 1, 1}));
  EXPECT_EQ(store.param("a.value.kernel").shape(), (Shape{16, 16, 1, 1}));
  EXPECT_EQ(store.param("a.out.kernel").shape(), (Shape{16, 32, 1, 1}));
  EXPECT_EQ(store.param("a.gamma").numel(), 1u);
}

TEST(Attention2D, ZeroQueryKeyGivesUniformRows) {
  ParamStore store(1);
  Attention2D attn(store, "a", 8);
  for (const char* name : {"a.query.kernel", "a.query.bias", "a.key.kernel"}) {
    for (auto& v : store.param(name).mutable_data()) v = 0.0;
  }
  Rng rng(3, "t");
  auto res = attn.forward(random_tensor(rng, {2, 8, 3, 3}));
  for (double v : res.attention.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 9.0);
}

TEST(Attention2D, SinglePositionAttendsToItself) {
  ParamStore store(1);
  Attention2D attn(store, "a", 8);
  store.param("a.gamma").mutable_data()[0] = 1.0;
  for (auto& v : store.param("a.out.kernel").mutable_data()) v = 0.0;
  // out = F + W_out * concat(O, F); select O alone through W_out.
  auto& k = store.param("a.out.kernel");
  for (std::size_t c = 0; c < 8; ++c) k.mutable_data()[c * 16 + c] = 1.0;
  Rng rng(4, "t");
  auto f = random_tensor(rng, {2, 8, 1, 1});
  auto res = attn.forward(f);
  EXPECT_EQ(res.attention.values(), std::vector<double>(2, 1.0));
  auto v = ops::conv2d(f, store.param("a.value.kernel"), store.param("a.value.bias"), 1, 0);
  for (std::size_t i = 0; i < f.numel(); ++i) {
    EXPECT_NEAR(res.maps.data()[i], f.data()[i] + v.data()[i], 1e-14);
  }
}

TEST(Attention2D, RowsAreStochastic) {
  ParamStore store(5);
  Attention2D attn(store, "a", 16);
  Rng rng(6, "t");
  auto res = attn.forward(random_tensor(rng, {3, 16, 4, 4}, -3, 3));
  EXPECT_EQ(res.attention.shape(), (Shape{3, 16, 16}));
  expect_rows_stochastic(res.attention);
}

TEST(Attention2D, ChannelMismatchIsConfigError) {
  ParamStore store(1);
  Attention2D attn(store, "a", 8);
  EXPECT_THROW(attn.forward(Tensor::zeros({1, 4, 2, 2})), ConfigError);
}

TEST(Attention2D, FramesAreIndependent) {
  ParamStore store(7);
  Attention2D attn(store, "a", 8);
  store.param("a.gamma").mutable_data()[0] = 0.8;
  Rng rng(8, "t");
  auto f = random_tensor(rng, {2, 8, 3, 3});
  auto both = attn.forward(f).maps;
  auto second = attn.forward(ops::slice(f, 0, 1, 1)).maps;
  for (std::size_t i = 0; i < second.numel(); ++i) EXPECT_EQ(both.data()[72 + i], second.data()[i]);
}

TEST(Attention2D, EquivariantToSpatialPermutationWithoutPositions) {
  ParamStore store(9);
  Attention2D attn(store, "a", 16);
  store.param("a.gamma").mutable_data()[0] = 0.9;
  Rng rng(10, "t");
  for (int trial = 0; trial < 20; ++trial) {
    auto f = random_tensor(rng, {2, 16, 4, 4});
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto lhs = attn.forward(permute_positions(f, perm)).maps;
    auto rhs = permute_positions(attn.forward(f).maps, perm);
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-9);
  }
}

TEST(Attention2D, PositionsBreakEquivariance) {
  ParamStore store(9);
  Attention2D attn(store, "a", 16);
  store.param("a.gamma").mutable_data()[0] = 0.9;
  auto pe = build_pe2d(16, 4, 4);
  Rng rng(11, "t");
  auto f = random_tensor(rng, {2, 16, 4, 4});
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto lhs = attn.forward(add_pe2d(permute_positions(f, perm), pe)).maps;
    auto rhs = permute_positions(attn.forward(add_pe2d(f, pe)).maps, perm);
    worst = std::max(worst, max_abs_diff(lhs, rhs) / max_abs(rhs));
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(CausalMask, LowerTriangular) {
  auto one = causal_mask(1);
  EXPECT_TRUE(one.at(0, 0));
  auto three = causal_mask(3);
  EXPECT_EQ(three.allowed_count(), 6u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(three.at(i, j), j <= i);
  }
  EXPECT_THROW(causal_mask(0), ContractError);
}

TEST(MultiHead, SingleKeyIgnoresQueries) {
  ParamStore store(12);
  MultiHeadAttention mha(store, "m", 8, 4);
  Rng rng(13, "t");
  auto kv = random_tensor(rng, {1, 8});
  auto q1 = random_tensor(rng, {3, 8});
  auto q2 = random_tensor(rng, {3, 8}, -5, 5);
  auto a = mha.forward(q1, kv, kv), b = mha.forward(q2, kv, kv);
  EXPECT_EQ(a.out.values(), b.out.values());
  for (double w : a.weights.data()) EXPECT_EQ(w, 1.0);
  for (std::size_t r = 1; r < 3; ++r) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(a.out.at({r, c}), a.out.at({0, c}));
  }
}

TEST(MultiHead, MaskedRowAttendsOnlyToSelf) {
  ParamStore store(14);
  MultiHeadAttention mha(store, "m", 8, 4);
  Rng rng(15, "t");
  auto x = random_tensor(rng, {4, 8});
  auto mask = causal_mask(4);
  auto res = mha.forward(x, x, x, &mask);
  for (std::size_t h = 0; h < 4; ++h) {
    EXPECT_EQ(res.weights.at({h, 0, 0}), 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) EXPECT_EQ(res.weights.at({h, i, j}), 0.0);
    }
  }
}

TEST(MultiHead, WeightsSumToOne) {
  ParamStore store(16);
  MultiHeadAttention mha(store, "m", 16, 4);
  Rng rng(17, "t");
  auto q = random_tensor(rng, {5, 16}, -2, 2);
  auto kv = random_tensor(rng, {7, 16}, -2, 2);
  auto res = mha.forward(q, kv, kv);
  EXPECT_EQ(res.weights.shape(), (Shape{4, 5, 7}));
  expect_rows_stochastic(res.weights);
  EXPECT_EQ(res.out.shape(), (Shape{5, 16}));
}

TEST(MultiHead, MaskShapeMismatchIsContractError) {
  ParamStore store(18);
  MultiHeadAttention mha(store, "m", 8, 4);
  auto x = Tensor::zeros({3, 8});
  auto mask = causal_mask(2);
  EXPECT_THROW(mha.forward(x, x, x, &mask), ContractError);
}

TEST(MultiHead, HeadsMustDivideWidth) {
  ParamStore store(19);
  EXPECT_THROW(MultiHeadAttention(store, "m", 10, 4), ConfigError);
}

}  // namespace
}  // namespace slt
