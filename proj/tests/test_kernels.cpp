#include <omp.h>

#include <gtest/gtest.h>

#include "derprop/kernels.hpp"
#include "helpers.hpp"

namespace derprop {
namespace {

using testing::random_matrix;

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

// Shapes straddle the column block so partial blocks are exercised.
struct Shape {
  std::size_t m, k, n;
};
constexpr Shape kShapes[] = {{1, 1, 1}, {3, 5, 7}, {8, 16, 300}, {17, 4, 513}, {64, 9, 257}};

class ThreadCounts : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }

 private:
  int saved_ = 1;
};

TEST_P(ThreadCounts, MatmulBitIdenticalToSerial) {
  for (const Shape& s : kShapes) {
    const Tensor a = random_matrix(s.m, s.k, s.m * 31 + s.n), b = random_matrix(s.k, s.n, s.k * 7 + 1);
    EXPECT_TRUE(kernels::matmul(a, b).bit_equal(kernels::serial::matmul(a, b)));
    const Tensor at = random_matrix(s.k, s.m, s.n + 3);
    EXPECT_TRUE(kernels::matmul_tn(at, b).bit_equal(kernels::serial::matmul_tn(at, b)));
  }
}

TEST_P(ThreadCounts, GramBitIdenticalToSerial) {
  for (const Shape& s : kShapes) {
    const Tensor x = random_matrix(s.k, s.n, s.n);
    EXPECT_TRUE(kernels::gram(x).bit_equal(kernels::serial::gram(x)));
  }
}

TEST_P(ThreadCounts, L1AndSignBitIdenticalToSerial) {
  for (const Shape& s : kShapes) {
    const Tensor a = random_matrix(s.m, s.n, 1 + s.m), b = random_matrix(s.m, s.n, 2 + s.n);
    const double par = kernels::l1_distance(a, b);
    EXPECT_EQ(par, kernels::serial::l1_distance(a, b));
    EXPECT_TRUE(kernels::sign_of_difference(a, b).bit_equal(kernels::serial::sign_of_difference(a, b)));
    Tensor sp, ss;
    EXPECT_EQ(kernels::l1_distance_with_sign(a, b, sp), par);
    EXPECT_EQ(kernels::serial::l1_distance_with_sign(a, b, ss), par);
    EXPECT_TRUE(sp.bit_equal(ss));
    EXPECT_TRUE(sp.bit_equal(kernels::sign_of_difference(a, b)));
  }
}

INSTANTIATE_TEST_SUITE_P(Kernels, ThreadCounts, ::testing::Values(1, 2, 3, 8));

TEST(Kernels, MatmulMatchesExtendedPrecisionOracle) {
  for (const Shape& s : kShapes) {
    const Tensor a = random_matrix(s.m, s.k, 5), b = random_matrix(s.k, s.n, 6);
    EXPECT_LE(max_abs_diff(kernels::matmul(a, b), matmul_oracle(a, b)), 1e-12 * static_cast<double>(s.k));
    EXPECT_LE(max_abs_diff(kernels::matmul_tn(transpose(a), b), matmul_oracle(a, b)), 1e-12 * static_cast<double>(s.k));
  }
}

TEST(Kernels, GramIsExactlySymmetric) {
  const Tensor x = random_matrix(8, 300, 9);
  const Tensor g = kernels::gram(x);
  EXPECT_TRUE(g.bit_equal(transpose(g)));
  EXPECT_LE(max_abs_diff(g, matmul_oracle(transpose(x), x)), 1e-12);
}

TEST(Kernels, L1DistanceOracleAndSignZero) {
  const Tensor a = Tensor::from_rows({{1, -2}, {3, 0.5}});
  const Tensor b = Tensor::from_rows({{1, 2}, {-1, 0.25}});
  EXPECT_EQ(kernels::l1_distance(a, b), 8.25);
  EXPECT_TRUE(kernels::sign_of_difference(a, b).bit_equal(Tensor::from_rows({{0, -1}, {1, 1}})));
}

TEST(Kernels, ShapeErrors) {
  EXPECT_THROW(kernels::matmul(Tensor::matrix(2, 3), Tensor::matrix(2, 3)), ShapeError);
  EXPECT_THROW(kernels::matmul_tn(Tensor::matrix(2, 3), Tensor::matrix(3, 3)), ShapeError);
  EXPECT_THROW(kernels::l1_distance(Tensor::matrix(2, 3), Tensor::matrix(3, 2)), ShapeError);
}

}  // namespace
}  // namespace derprop
