#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "derprop/similarity.hpp"
#include "helpers.hpp"

namespace derprop {
namespace {

using testing::random_matrix;

Tensor gram_oracle(const Tensor& x) {
  const std::size_t d = x.rows(), m = x.cols();
  Tensor g = Tensor::matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < d; ++k) s += static_cast<long double>(x(k, i)) * x(k, j);
      g(i, j) = static_cast<double>(s);
    }
  return g;
}

Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

FeatureMap random_features(std::size_t d, std::size_t m, std::uint64_t seed) {
  return normalize_features(random_matrix(d, m, seed), ZeroColumnPolicy::kError);
}

TEST(Cosine, IntroPairBothRootTwoOverTwo) {
  const double r3 = std::sqrt(3.0);
  const std::vector<double> anchor{1, 1, 1};
  EXPECT_NEAR(cosine(anchor, std::vector<double>{2 + r3, 1, 0}, CosineConvention::kL2), std::numbers::sqrt2 / 2, 1e-12);
  EXPECT_NEAR(cosine(anchor, std::vector<double>{2 - r3, 1, 0}, CosineConvention::kL2), std::numbers::sqrt2 / 2, 1e-12);
}

TEST(Cosine, SelfSimilarity) {
  const std::vector<double> v{0.5, -0.3, 0.2};
  EXPECT_NEAR(cosine(v, v, CosineConvention::kL2), 1.0, 1e-15);
  EXPECT_NEAR(cosine(v, v, CosineConvention::kL1Dot), 0.25 + 0.09 + 0.04, 1e-15);
}

TEST(Cosine, ZeroVectorNamesArgument) {
  const std::vector<double> z{0, 0, 0}, v{1, 2, 3};
  try {
    cosine(v, z, CosineConvention::kL2);
    FAIL();
  } catch (const ZeroVectorError& e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos);
  }
  EXPECT_THROW(cosine(z, v, CosineConvention::kL1Dot), ZeroVectorError);
}

TEST(Cosine, L2RangeOnRandomPairs) {
  CounterRng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> u(5), v(5);
    for (std::size_t i = 0; i < 5; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
    }
    const double c = cosine(u, v, CosineConvention::kL2);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Similarity, IdenticalColumns) {
  const FeatureMap v{Tensor::from_rows({{0.5, 0.5}, {-0.25, -0.25}, {0.25, 0.25}})};
  const Tensor s = similarity_matrix(v).values;
  for (double x : s.values()) EXPECT_EQ(x, 0.375);
}

TEST(Similarity, OrthonormalColumnsGiveIdentity) {
  EXPECT_TRUE(similarity_matrix(FeatureMap{Tensor::identity(2)}).values.bit_equal(Tensor::identity(2)));
}

TEST(Similarity, MatchesDotProductOracleAndIsSymmetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FeatureMap v = random_features(6, 13, seed);
    const Tensor s = similarity_matrix(v).values;
    EXPECT_LE(max_abs_diff(s, gram_oracle(v.values)), 1e-12);
    EXPECT_TRUE(s.bit_equal(transpose(s)));
  }
}

TEST(DerivativeSimilarity, ConstantColumnsGiveZero) {
  const FeatureMap v{Tensor({3, 4}, 1.0 / 3.0)};
  const SimilarityMatrix s = derivative_similarity(v, 1);
  for (double x : s.values.values()) EXPECT_EQ(x, 0.0);
}

TEST(DerivativeSimilarity, HandExample) {
  // Differences of the columns are [1, 1] and [-1, 1].
  const FeatureMap v{Tensor::from_rows({{0, 1}, {1, 0}, {2, 1}})};
  EXPECT_TRUE(derivative_similarity(v, 1).values.bit_equal(Tensor::from_rows({{2, 0}, {0, 2}})));
}

TEST(DerivativeSimilarity, OrderZeroIsPlainSimilarity) {
  const FeatureMap v = random_features(5, 7, 4);
  EXPECT_TRUE(derivative_similarity(v, 0).values.bit_equal(similarity_matrix(v).values));
  EXPECT_THROW(derivative_similarity(v, 5), DimensionUnderflowError);
}

TEST(GtSimilarity, Examples) {
  EXPECT_TRUE(gt_similarity_from_labels(LabelMap{{0, 0, 1}, 2})
                  .values.bit_equal(Tensor::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}})));
  const SimilarityMatrix same = gt_similarity_from_labels(LabelMap{{2, 2, 2, 2}, 3});
  for (double x : same.values.values()) EXPECT_EQ(x, 1.0);
  EXPECT_TRUE(gt_similarity_from_labels(LabelMap{{0, 1, 2}, 4}).values.bit_equal(Tensor::identity(3)));
  EXPECT_THROW(gt_similarity_from_labels(Tensor::from_rows({{0.5, 1}, {0.5, 0}})), ShapeError);
}

TEST(GtSimilarity, SquareKeepsSparsityPattern) {
  CounterRng rng(8);
  LabelMap y;
  y.num_classes = 4;
  for (int i = 0; i < 20; ++i) y.classes.push_back(static_cast<int>(rng.below(4)));
  const Tensor s = gt_similarity_from_labels(y).values;
  const Tensor s2 = matmul_oracle(s, s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i] != 0.0, s2[i] != 0.0);
}

TEST(Propagate, IdentityKeepsLogits) {
  const Tensor l = random_matrix(3, 4, 1);
  EXPECT_TRUE(propagate(LogitMap{l}, SimilarityMatrix{Tensor::identity(4)}).values.bit_equal(l));
}

TEST(Propagate, HandExample) {
  const Tensor s = Tensor::from_rows({{1, 0.5}, {0.5, 1}});
  EXPECT_TRUE(propagate(LogitMap{Tensor::identity(2)}, SimilarityMatrix{s}).values.bit_equal(s));
}

TEST(Propagate, AllOnesGivesRowSums) {
  const Tensor l = Tensor::from_rows({{1, 2, 3}, {-1, 0.5, 4}});
  const Tensor out = propagate(LogitMap{l}, SimilarityMatrix{Tensor({3, 3}, 1.0)}).values;
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(out(0, j), 6.0);
    EXPECT_EQ(out(1, j), 3.5);
  }
}

TEST(Propagate, LinearInLogits) {
  const Tensor s = similarity_matrix(random_features(4, 6, 2)).values;
  const Tensor l1 = random_matrix(3, 6, 3), l2 = random_matrix(3, 6, 4);
  const Tensor lhs = propagate(LogitMap{axpby(2.5, l1, -1.5, l2)}, SimilarityMatrix{s}).values;
  const Tensor rhs = axpby(2.5, propagate(LogitMap{l1}, SimilarityMatrix{s}).values, -1.5,
                           propagate(LogitMap{l2}, SimilarityMatrix{s}).values);
  EXPECT_LE(max_abs_diff(lhs, rhs), 1e-10);
  EXPECT_THROW(propagate(LogitMap{l1}, SimilarityMatrix{Tensor::identity(5)}), ShapeError);
}

TEST(DerivativePropagate, IdentityKernelKeepsLogits) {
  // Constant column with unit L2 norm: S = 1 and the first difference vanishes.
  const FeatureMap v{Tensor::from_rows({{0.5}, {0.5}, {0.5}, {0.5}})};
  const Tensor l = Tensor::from_rows({{0.3}, {-2.0}, {1.0}});
  EXPECT_TRUE(rectification_kernel(v).bit_equal(Tensor::identity(1)));
  EXPECT_TRUE(derivative_propagate(LogitMap{l}, v).values.bit_equal(l));
}

TEST(DerivativePropagate, TwoPixelHandExample) {
  // V = [[0.6, 0.5], [0.4, 0.5]]: S = [[0.52, 0.5], [0.5, 0.5]], D^1 V = [-0.2, 0],
  // D^1 S = [[0.04, 0], [0, 0]], so S + D^1 S = [[0.56, 0.5], [0.5, 0.5]].
  const FeatureMap v{Tensor::from_rows({{0.6, 0.5}, {0.4, 0.5}})};
  const Tensor l = Tensor::from_rows({{1.0, 0.0}, {0.0, 2.0}});
  const Tensor want = matmul_oracle(l, Tensor::from_rows({{0.56, 0.5}, {0.5, 0.5}}));
  EXPECT_LE(max_abs_diff(derivative_propagate(LogitMap{l}, v).values, want), 1e-15);
}

TEST(DerivativePropagate, EqualsComposition) {
  const FeatureMap v = random_features(6, 9, 12);
  const Tensor l = random_matrix(4, 9, 13);
  const Tensor k = add(similarity_matrix(v).values, derivative_similarity(v, 1).values);
  EXPECT_TRUE(derivative_propagate(LogitMap{l}, v).values.bit_equal(propagate(LogitMap{l}, SimilarityMatrix{k}).values));
}

TEST(DerivativePropagate, ScalesWithLogits) {
  const FeatureMap v = random_features(5, 6, 14);
  const Tensor l = random_matrix(3, 6, 15);
  EXPECT_LE(max_abs_diff(derivative_propagate(LogitMap{scale(l, 3.0)}, v).values,
                         scale(derivative_propagate(LogitMap{l}, v).values, 3.0)),
            1e-12);
}

TEST(DerivativePropagate, SinglePixelScalesColumn) {
  const FeatureMap v = random_features(5, 1, 16);
  const Tensor l = random_matrix(4, 1, 17);
  const auto col = v.values.column(0);
  const auto d1 = diff(col, 1);
  double factor = 0.0;
  for (double x : col) factor += x * x;
  for (double x : d1) factor += x * x;
  const Tensor out = derivative_propagate(LogitMap{l}, v).values;
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(c, 0), l(c, 0) * factor, 1e-14);
  EXPECT_EQ(argmax_labels(out).classes, argmax_labels(l).classes);
}

TEST(DerivativePropagate, RejectsBadShapes) {
  EXPECT_THROW(derivative_propagate(LogitMap{random_matrix(2, 3, 1)}, random_features(4, 4, 2)), ShapeError);
  EXPECT_THROW(derivative_propagate(LogitMap{random_matrix(2, 3, 1)}, FeatureMap{Tensor({1, 3}, 1.0)}),
               DimensionUnderflowError);
}

TEST(KernelNormalization, ColumnsHaveUnitL1) {
  const Tensor k = rectification_kernel(random_features(6, 10, 20), DerivativeVariant::kForward,
                                        KernelNormalization::kColumnL1);
  for (std::size_t j = 0; j < k.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < k.rows(); ++i) s += std::abs(k(i, j));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(KernelNormalization, IdentityUnchangedAndZeroColumnKept) {
  EXPECT_TRUE(normalize_kernel_columns(Tensor::identity(4)).bit_equal(Tensor::identity(4)));
  const Tensor z = normalize_kernel_columns(Tensor::from_rows({{0, 2}, {0, -2}}));
  EXPECT_TRUE(z.bit_equal(Tensor::from_rows({{0, 0.5}, {0, -0.5}})));
}

TEST(Blend, Endpoints) {
  const ProbMap pw = softmax_columns(LogitMap{random_matrix(3, 5, 30)});
  const ProbMap pt = softmax_columns(LogitMap{random_matrix(3, 5, 31)});
  EXPECT_TRUE(blend_pseudo_labels(pw, pt, {0, 10}).values.bit_equal(pw.values));
  EXPECT_TRUE(blend_pseudo_labels(pw, pt, {10, 10}).values.bit_equal(pt.values));
  const Tensor mid = blend_pseudo_labels(pw, pt, {5, 10}).values;
  for (std::size_t i = 0; i < mid.size(); ++i) EXPECT_NEAR(mid[i], (pw.values[i] + pt.values[i]) / 2, 1e-15);
}

TEST(Blend, ColumnStochasticForEveryEta) {
  const ProbMap pw = softmax_columns(LogitMap{random_matrix(4, 8, 32)});
  const ProbMap pt = softmax_columns(LogitMap{random_matrix(4, 8, 33)});
  for (int ep = 0; ep <= 7; ++ep) {
    const Tensor b = blend_pseudo_labels(pw, pt, {ep, 7}).values;
    for (std::size_t c = 0; c < b.cols(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < b.rows(); ++r) s += b(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Blend, ScheduleEta) {
  EXPECT_EQ((BlendSchedule{0, 30}.eta()), 0.0);
  EXPECT_EQ((BlendSchedule{30, 30}.eta()), 1.0);
  EXPECT_THROW((BlendSchedule{31, 30}.eta()), Error);
  EXPECT_THROW((BlendSchedule{0, 0}.eta()), Error);
}

TEST(ConfidenceMask, Examples) {
  const ProbMap p{Tensor::from_rows({{0.97, 0.6}, {0.03, 0.4}})};
  EXPECT_EQ(confidence_mask(p, 0.95), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(confidence_mask(p, 0.0), (std::vector<std::uint8_t>{1, 1}));
}

}  // namespace
}  // namespace derprop
