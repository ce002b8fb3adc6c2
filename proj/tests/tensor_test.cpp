#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "slt/error.hpp"
#include "slt/grad_check.hpp"
#include "slt/log.hpp"
#include "slt/ops.hpp"
#include "test_util.hpp"

namespace slt {
namespace {

using testing::random_tensor;

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

TEST(Tensor, RejectsZeroExtentAndWrongValueCount) {
  EXPECT_THROW(Tensor::zeros({2, 0}), ShapeError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(Tensor, ItemNeedsOneElement) {
  EXPECT_DOUBLE_EQ(Tensor::scalar(3.5).item(), 3.5);
  EXPECT_THROW(Tensor::zeros({2}).item(), ContractError);
}

TEST(Tensor, IndexingIsRowMajor) {
  auto t = Tensor::from({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({1, 2}), 5.0);
  EXPECT_EQ(t.at({0, 1}), 1.0);
  EXPECT_THROW(t.at({2, 0}), ShapeError);
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vec(ops::matmul(eye, b).data()), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, HandExample) {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto b = Tensor::from({2, 1}, {1, 1});
  auto c = ops::matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(vec(c.data()), (std::vector<double>{3, 7}));
}

TEST(Matmul, GradientOfSumIsAllOnes) {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  auto b = Tensor::from({2, 1}, {1, 1});
  backward(ops::sum(ops::matmul(a, b)));
  EXPECT_EQ(vec(a.grad()), (std::vector<double>{1, 1, 1, 1}));
  auto r = grad_check([&] { return ops::sum(ops::matmul(a, b)); }, {a}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3] x [2,3]"), std::string::npos) << e.what();
  }
}

TEST(Conv2d, HandExample) {
  auto x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto k = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
  auto y = ops::conv2d(x, k, Tensor(), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 5.0);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  Rng rng(3, "t");
  auto x = random_tensor(rng, {2, 1, 5, 3});
  auto y = ops::conv2d(x, Tensor::from({1, 1, 1, 1}, {1}), Tensor(), 1, 0);
  EXPECT_EQ(vec(y.data()), vec(x.data()));
}

TEST(Conv2d, FiniteDifferenceAgreement) {
  Rng rng(4, "t");
  auto x = random_tensor(rng, {1, 2, 4, 4});
  auto k = random_tensor(rng, {3, 2, 3, 3});
  auto b = random_tensor(rng, {3});
  auto w = random_tensor(rng, {1, 3, 4, 4});
  auto r = grad_check([&] { return ops::sum(ops::mul(ops::conv2d(x, k, b, 1, 1), w)); }, {x, k, b});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Conv2d, ExtentArithmetic) {
  EXPECT_EQ(ops::conv_out_extent(32, 4, 2, 1), 16u);
  EXPECT_EQ(ops::conv_out_extent(4, 3, 1, 1), 4u);
  EXPECT_THROW(ops::conv_out_extent(5, 2, 2, 0), ConfigError);
  EXPECT_THROW(ops::conv_out_extent(2, 5, 1, 0), ConfigError);
  EXPECT_THROW(ops::conv2d(Tensor::zeros({1, 1, 5, 5}), Tensor::zeros({1, 1, 2, 2}), Tensor(), 2, 0), ConfigError);
}

TEST(Softmax, UniformOnEqualLogits) {
  auto y = ops::softmax(Tensor::zeros({4}), 0);
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(5, "t");
  auto x = random_tensor(rng, {3, 7}, -5, 5);
  auto shifted = ops::add(x, Tensor::full({3, 7}, 17.25));
  auto a = ops::softmax(x, 1), b = ops::softmax(shifted, 1);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-15);
}

TEST(Softmax, AnalyticPair) {
  auto y = ops::softmax(Tensor::from({2}, {0.0, std::log(3.0)}), 0);
  EXPECT_NEAR(y.data()[0], 0.25, 1e-15);
  EXPECT_NEAR(y.data()[1], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneForLargeInputs) {
  Rng rng(6, "t");
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_tensor(rng, {4, 9}, -50, 50);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      auto y = ops::softmax(x, axis);
      const std::size_t outer = axis == 0 ? 9 : 4, inner = axis == 0 ? 4 : 9;
      for (std::size_t o = 0; o < outer; ++o) {
        double s = 0;
        for (std::size_t i = 0; i < inner; ++i) s += axis == 0 ? y.at({i, o}) : y.at({o, i});
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
      for (double v : y.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(BatchNorm, ConstantInputGivesZeros) {
  auto x = Tensor::full({2, 1, 3, 3}, 4.0);
  auto stats = ops::BatchNormStats::fresh(1);
  auto y = ops::batchnorm2d(x, Tensor::full({1}, 1.0), Tensor::zeros({1}), stats, ops::NormMode::kTrain);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, TwoValueChannel) {
  auto x = Tensor::from({1, 1, 1, 2}, {1, 3});
  auto stats = ops::BatchNormStats::fresh(1);
  auto y = ops::batchnorm2d(x, Tensor::full({1}, 1.0), Tensor::zeros({1}), stats, ops::NormMode::kTrain, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(y.data()[0], -1.0);
  EXPECT_DOUBLE_EQ(y.data()[1], 1.0);
}

TEST(BatchNorm, NormalizesPerChannelAndTracksRunningStats) {
  Rng rng(7, "t");
  auto x = random_tensor(rng, {3, 2, 4, 4}, -2, 5);
  auto stats = ops::BatchNormStats::fresh(2);
  auto y = ops::batchnorm2d(x, Tensor::full({2}, 1.0), Tensor::zeros({2}), stats, ops::NormMode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, sq = 0, xs = 0, xsq = 0;
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          const double v = y.at({n, c, i, j});
          s += v;
          sq += v * v;
          xs += x.at({n, c, i, j});
        }
      }
    }
    EXPECT_LT(std::abs(s / 48), 1e-6);
    EXPECT_LT(std::abs(sq / 48 - 1.0), 1e-3);
    const double mu = xs / 48;
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) xsq += (x.at({n, c, i, j}) - mu) * (x.at({n, c, i, j}) - mu);
      }
    }
    EXPECT_NEAR(stats.running_mean[c], 0.1 * mu, 1e-12);
    EXPECT_NEAR(stats.running_var[c], 0.9 + 0.1 * xsq / 47, 1e-12);
  }
  EXPECT_EQ(stats.updates, 1u);
}

TEST(BatchNorm, EvalBeforeTrainingUsesInitialStatsAndWarns) {
  std::vector<std::string> warnings;
  log::set_sink([&](log::Level level, std::string_view m) {
    if (level == log::Level::kWarn) warnings.emplace_back(m);
  });
  auto x = Tensor::from({1, 1, 1, 2}, {0.5, -2.0});
  auto stats = ops::BatchNormStats::fresh(1);
  auto y = ops::batchnorm2d(x, Tensor::full({1}, 1.0), Tensor::zeros({1}), stats, ops::NormMode::kEval);
  log::set_sink({});
  EXPECT_NEAR(y.data()[0], 0.5 / std::sqrt(1 + 1e-5), 1e-15);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::from({3}, {1, -2, 5}, true);
  backward(ops::sum(x));
  EXPECT_EQ(vec(x.grad()), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SquareGivesTwiceX) {
  auto x = Tensor::from({2}, {1, 2}, true);
  backward(ops::sum(ops::mul(x, x)));
  EXPECT_EQ(vec(x.grad()), (std::vector<double>{2, 4}));
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Tensor::from({2}, {1, 2}, true);
  backward(ops::sum(x));
  backward(ops::sum(ops::scale(x, 3.0)));
  EXPECT_EQ(vec(x.grad()), (std::vector<double>{4, 4}));
  x.zero_grad();
  backward(ops::sum(x));
  EXPECT_EQ(vec(x.grad()), (std::vector<double>{1, 1}));
}

TEST(Backward, NonScalarLossIsContractError) { EXPECT_THROW(backward(Tensor::zeros({2}, true)), ContractError); }

TEST(Backward, TwoConsumersSumContributions) {
  Rng rng(8, "t");
  auto x = random_tensor(rng, {3, 3});
  auto w = random_tensor(rng, {3, 3});
  auto f = [&] {
    auto h = ops::relu(ops::matmul(x, w));
    return ops::sum(ops::add(ops::mul(h, x), ops::softmax(h, 1)));
  };
  auto r = grad_check(f, {x, w});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto x = Tensor::from({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = ops::sum(ops::mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_mode_enabled());
}

TEST(Backward, RecordListsParentsFirst) {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto h = ops::mul(x, x);
  auto loss = ops::sum(ops::add(h, ops::relu(h)));
  auto order = computation_record(loss);
  ASSERT_FALSE(order.empty());
  EXPECT_EQ(order.back(), loss.node().get());
  std::map<const Node*, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (auto* n : order) {
    for (const auto& p : n->parents) {
      if (pos.count(p.get())) {
        EXPECT_GT(pos[n], pos[p.get()]);
      }
    }
  }
}

TEST(Reshape, TransposeAndReshapeRoundTripExactly) {
  Rng rng(9, "t");
  auto x = random_tensor(rng, {3, 5});
  EXPECT_EQ(vec(ops::transpose(ops::transpose(x)).data()), vec(x.data()));
  EXPECT_EQ(vec(ops::reshape(ops::reshape(x, {5, 3}), {3, 5}).data()), vec(x.data()));
  auto y = random_tensor(rng, {2, 3, 4});
  EXPECT_EQ(vec(ops::permute(ops::permute(y, {2, 0, 1}), {1, 2, 0}).data()), vec(y.data()));
  EXPECT_THROW(ops::reshape(x, {4, 4}), ShapeError);
}

TEST(Elementwise, HandValuesAndIdentities) {
  auto a = Tensor::from({3}, {1, -2, 3});
  auto b = Tensor::from({3}, {4, 5, -6});
  EXPECT_EQ(vec(ops::add(a, b).data()), (std::vector<double>{5, 3, -3}));
  EXPECT_EQ(vec(ops::sub(a, b).data()), (std::vector<double>{-3, -7, 9}));
  EXPECT_EQ(vec(ops::mul(a, b).data()), (std::vector<double>{4, -10, -18}));
  EXPECT_EQ(vec(ops::scale(a, 1.0).data()), vec(a.data()));
  EXPECT_EQ(vec(ops::relu(a).data()), (std::vector<double>{1, 0, 3}));
  EXPECT_EQ(vec(ops::add(a, Tensor::zeros({3})).data()), vec(a.data()));
  EXPECT_DOUBLE_EQ(ops::mean(a).item(), 2.0 / 3.0);
  EXPECT_THROW(ops::add(a, Tensor::zeros({2})), ShapeError);
}

TEST(Concat, AlongChannelAxis) {
  auto a = Tensor::from({1, 1, 2}, {1, 2});
  auto b = Tensor::from({1, 2, 2}, {3, 4, 5, 6});
  auto c = ops::concat({a, b}, 1);
  EXPECT_EQ(c.shape(), (Shape{1, 3, 2}));
  EXPECT_EQ(vec(c.data()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(vec(ops::slice(c, 1, 1, 2).data()), vec(b.data()));
}

TEST(Embedding, LooksUpRows) {
  auto table = Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21});
  std::vector<std::size_t> ids{2, 0, 2};
  auto e = ops::embedding(table, ids);
  EXPECT_EQ(vec(e.data()), (std::vector<double>{20, 21, 0, 1, 20, 21}));
  std::vector<std::size_t> bad{3};
  EXPECT_THROW(ops::embedding(table, bad), VocabularyError);
}

TEST(LayerNorm, NormalizesRows) {
  auto x = Tensor::from({1, 2}, {1, 3});
  auto y = ops::layer_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}), 0.0);
  EXPECT_DOUBLE_EQ(y.data()[0], -1.0);
  EXPECT_DOUBLE_EQ(y.data()[1], 1.0);
}

TEST(GradCheck, SumIsExactWithDyadicStep) {
  auto x = Tensor::from({4}, {0.5, -1.25, 2.0, 3.75});
  auto r = grad_check([](const Tensor& t) { return ops::sum(t); }, x, std::ldexp(1.0, -20));
  EXPECT_EQ(r.max_relative_error, 0.0);
}

TEST(GradCheck, DetectsNonDeterminism) {
  auto x = Tensor::from({2}, {1, 2});
  int calls = 0;
  auto f = [&] { return ops::add(ops::sum(x), Tensor::scalar(static_cast<double>(calls++))); };
  EXPECT_THROW(grad_check(f, {x}), ContractError);
}

TEST(GradCheck, NonScalarFunctionRejected) {
  auto x = Tensor::from({2}, {1, 2});
  EXPECT_THROW(grad_check([](const Tensor& t) { return ops::relu(t); }, x), ContractError);
}

TEST(GradCheck, FlagsWrongBackward) {
  auto x = Tensor::from({3}, {0.3, -0.7, 1.1});
  // Forward x^2, backward claims 3x.
  auto f = [&] {
    std::vector<double> v(x.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.data()[i] * x.data()[i];
    auto node_x = x;
    auto y = make_result(x.shape(), v, {x},
                         [node_x](const std::vector<double>& g) {
                           std::vector<double> d(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i) d[i] = 3.0 * node_x.data()[i] * g[i];
                           accumulate_grad(node_x.node(), d);
                         },
                         "bad_square");
    return ops::sum(y);
  };
  auto r = grad_check(f, {x});
  EXPECT_GT(r.max_relative_error, 0.3);
}

}  // namespace
}  // namespace slt
