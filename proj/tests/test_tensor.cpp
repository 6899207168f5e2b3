#include <cmath>

#include <gtest/gtest.h>

#include "derprop/tensor.hpp"
#include "helpers.hpp"

namespace derprop {
namespace {

using testing::random_matrix;

TEST(TensorCore, ConstructionChecksElementCount) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
  const Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t(1, 2), 1.5);
}

TEST(TensorCore, TransposeSwapsIndices) {
  const Tensor a = random_matrix(3, 5, 1);
  const Tensor t = transpose(a);
  ASSERT_EQ(t.rows(), 5u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(t(j, i), a(i, j));
}

TEST(L1Normalize, EqualEntries) {
  const Tensor out = l1_normalize_columns(Tensor::from_rows({{2}, {2}}), ZeroColumnPolicy::kError);
  EXPECT_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(1, 0), 0.5);
}

TEST(L1Normalize, SignsPreserved) {
  const Tensor out = l1_normalize_columns(Tensor::from_rows({{1}, {-1}}), ZeroColumnPolicy::kError);
  EXPECT_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(1, 0), -0.5);
}

TEST(L1Normalize, ZeroColumnUniformFallback) {
  const Tensor out = l1_normalize_columns(Tensor::from_rows({{0}, {0}}), ZeroColumnPolicy::kUniformFallback);
  EXPECT_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(1, 0), 0.5);
}

TEST(L1Normalize, ZeroColumnErrorNamesColumn) {
  const Tensor t = Tensor::from_rows({{1, 0, 2}, {1, 0, 3}});
  try {
    l1_normalize_columns(t, ZeroColumnPolicy::kError);
    FAIL() << "expected DegenerateColumnError";
  } catch (const DegenerateColumnError& e) {
    EXPECT_EQ(e.column(), 1u);
  }
}

TEST(L1Normalize, UnitNormAndIdempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor t = random_matrix(6, 9, seed);
    const Tensor once = l1_normalize_columns(t, ZeroColumnPolicy::kError);
    for (std::size_t c = 0; c < once.cols(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < once.rows(); ++r) s += std::abs(once(r, c));
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    const Tensor twice = l1_normalize_columns(once, ZeroColumnPolicy::kError);
    EXPECT_LE(max_abs_diff(once, twice), 1e-12);
  }
}

TEST(Softmax, SymmetricColumn) {
  const Tensor p = softmax_columns(LogitMap{Tensor::from_rows({{0}, {0}})}).values;
  EXPECT_EQ(p(0, 0), 0.5);
  EXPECT_EQ(p(1, 0), 0.5);
}

TEST(Softmax, EqualLogitsGiveUniform) {
  for (double t : {-700.0, -3.0, 0.0, 2.5, 800.0}) {
    const Tensor p = softmax_columns(LogitMap{Tensor::from_rows({{t}, {t}, {t}})}).values;
    for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(p(r, 0), 1.0 / 3.0, 1e-15);
  }
}

TEST(Softmax, LogTwoColumnAgainstExtendedPrecision) {
  const double ln2 = std::log(2.0);
  const Tensor p = softmax_columns(LogitMap{Tensor::from_rows({{ln2}, {0}})}).values;
  const long double e0 = std::exp(static_cast<long double>(ln2));
  const long double z = e0 + 1.0L;
  EXPECT_NEAR(p(0, 0), static_cast<double>(e0 / z), 1e-15);
  EXPECT_NEAR(p(1, 0), static_cast<double>(1.0L / z), 1e-15);
  EXPECT_NEAR(p(0, 0), 2.0 / 3.0, 1e-15);
}

TEST(Softmax, ColumnsSumToOneAndShiftInvariant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor l = random_matrix(5, 7, seed, 3.0);
    const Tensor p = softmax_columns(LogitMap{l}).values;
    Tensor shifted = l;
    for (double& v : shifted.values()) v += 17.25;
    const Tensor q = softmax_columns(LogitMap{shifted}).values;
    EXPECT_LE(max_abs_diff(p, q), 1e-12);
    for (std::size_t c = 0; c < p.cols(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < p.rows(); ++r) s += p(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
      for (std::size_t r = 0; r < p.rows(); ++r)
        for (std::size_t k = 0; k < p.rows(); ++k)
          if (l(r, c) > l(k, c)) EXPECT_GE(p(r, c), p(k, c));
    }
  }
}

TEST(Softmax, ExtremeLogitsStayFinite) {
  const Tensor p = softmax_columns(LogitMap{Tensor::from_rows({{1e300}, {-1e300}})}).values;
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(1, 0), 0.0);
}

TEST(EntrywiseL1, Examples) {
  EXPECT_EQ(entrywise_l1(Tensor::matrix(3, 3)), 0.0);
  EXPECT_EQ(entrywise_l1(Tensor::from_rows({{1, -1}, {2, -2}})), 6.0);
}

TEST(EntrywiseL1, MatchesLoopOracleAndTriangle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = random_matrix(7, 4, seed);
    const Tensor b = random_matrix(7, 4, seed + 100);
    long double oracle = 0.0L;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) oracle += std::fabs(static_cast<long double>(a(i, j)));
    EXPECT_NEAR(entrywise_l1(a), static_cast<double>(oracle), 1e-12);
    EXPECT_LE(entrywise_l1(add(a, b)), entrywise_l1(a) + entrywise_l1(b) + 1e-12);
  }
}

TEST(LabelMap, OneHotRoundTrip) {
  LabelMap y{{0, 2, 1, 2}, 3};
  const Tensor oh = y.one_hot();
  EXPECT_EQ(oh(2, 1), 1.0);
  EXPECT_EQ(oh(0, 1), 0.0);
  EXPECT_EQ(labels_from_one_hot(oh).classes, y.classes);
  EXPECT_THROW(labels_from_one_hot(Tensor::from_rows({{0.5}, {0.5}})), ShapeError);
}

TEST(LabelMap, ArgmaxTiesGoToLowestIndex) {
  const LabelMap y = argmax_labels(Tensor::from_rows({{1, 0}, {1, 2}}));
  EXPECT_EQ(y.classes, (std::vector<int>{0, 1}));
}

TEST(TensorCore, RequireFiniteNamesIndex) {
  Tensor t = Tensor::matrix(2, 2);
  t[3] = std::nan("");
  try {
    require_finite(t, "probe");
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

}  // namespace
}  // namespace derprop
