#include <gtest/gtest.h>

#include <cmath>

#include "crda/rng.hpp"
#include "crda/tensor.hpp"
#include "oracles.hpp"

namespace crda {
namespace {

TEST(Tensor, ElementwiseExamples) {
  const Tensor a({2}, {1, 2});
  const Tensor b({2}, {3, 4});
  EXPECT_EQ(elementwise(ElementwiseOp::kAdd, a, b), Tensor({2}, {4, 6}));
  EXPECT_EQ(elementwise(ElementwiseOp::kMul, Tensor({2}, {2, 3}), 0.0), Tensor({2}, {0, 0}));
  EXPECT_EQ(elementwise(ElementwiseOp::kMax, a, b), b);
  EXPECT_EQ(elementwise(ElementwiseOp::kMin, a, b), a);
  EXPECT_EQ(clamp(Tensor({2}, {-0.5, 1.5}), 0, 1), Tensor({2}, {0, 1}));
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  try {
    elementwise(ElementwiseOp::kAdd, Tensor({2, 3}), Tensor({3, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
  }
}

TEST(Tensor, NonFiniteResultThrows) {
  EXPECT_THROW(elementwise(ElementwiseOp::kDiv, Tensor({1}, {1.0}), 0.0), NumericError);
  EXPECT_THROW(Tensor({0, 3}), DimensionError);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, MatmulExamples) {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor a({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, a), a);
  EXPECT_EQ(matmul(a, eye), a);
  EXPECT_EQ(matmul(a, Tensor({2, 1}, {5, 6})), Tensor({2, 1}, {17, 39}));
  EXPECT_THROW(matmul(a, Tensor({3, 1})), DimensionError);
}

TEST(Tensor, MatmulMatchesTripleLoop) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor a = uniform(rng, {7, 5}, -2, 2);
    const Tensor b = uniform(rng, {5, 3}, -2, 2);
    EXPECT_EQ(matmul(a, b), testing::naive_matmul(a, b));
  }
}

TEST(Tensor, TransposeAndRows) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(transpose(a), Tensor({3, 2}, {1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(a.slice_rows(1, 2), Tensor({1, 3}, {4, 5, 6}));
  const std::size_t idx[] = {1, 0, 1};
  EXPECT_EQ(a.gather_rows(idx), Tensor({3, 3}, {4, 5, 6, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(concat_rows(a, a).dim(0), 4u);
  EXPECT_THROW(a.slice_rows(1, 3), DimensionError);
  EXPECT_THROW(a.reshaped({4}), DimensionError);
}

TEST(Tensor, GaussianZeroStdAndDeterminism) {
  Rng r1(1);
  EXPECT_EQ(gaussian(r1, {4}, 0, 0), Tensor({4}, {0, 0, 0, 0}));
  Rng a(7), b(7);
  EXPECT_EQ(gaussian(a, {16}, 1, 2), gaussian(b, {16}, 1, 2));
  Rng c(1);
  EXPECT_THROW(gaussian(c, {2}, 0, -1), std::invalid_argument);
}

TEST(Tensor, GaussianMonteCarloMean) {
  Rng rng(3);
  const Tensor g = gaussian(rng, {1000000}, 0, 1);
  double sum = 0;
  for (double v : g.data()) sum += v;
  EXPECT_NEAR(sum / 1e6, 0.0, 0.01);
}

TEST(Tensor, ClampAlwaysInRange) {
  Rng rng(5);
  const Tensor x = uniform(rng, {1000}, -10, 10);
  for (double v : clamp(x, 0, 1).data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

}  // namespace
}  // namespace crda
