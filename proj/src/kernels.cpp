#include "derprop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace derprop::kernels {

namespace {

void check_inner(const Tensor& a, const Tensor& b, std::size_t ka, std::size_t kb, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  if (ka != kb) {
    throw ShapeError(std::string(op) + ": inner dimensions differ, " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

constexpr std::size_t kColumnBlock = 256;

// Columns [j0, j1) of C = A*B. Each row of B is read once per block and
// reused for every row of A; every entry still sums over p in ascending order.
inline void matmul_block(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                         std::size_t j0, std::size_t j1) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* b_row = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* c_row = c + i * n;
      for (std::size_t j = j0; j < j1; ++j) c_row[j] += av * b_row[j];
    }
  }
}

// Row i of A^T*B: sum_p A[p,i] * B[p,:].
inline void matmul_tn_row(const Tensor& a, const Tensor& b, std::size_t i, double* c_row) {
  const std::size_t k = a.rows();
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  const double* ad = a.raw();
  const double* bd = b.raw();
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ad[p * m + i];
    if (av == 0.0) continue;
    const double* b_row = bd + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// Row i of X^T X, accumulated over the d feature rows in ascending order.
// Products commute exactly, so the result is bitwise symmetric.
inline void gram_row(const double* __restrict x, std::size_t d, std::size_t m, std::size_t i, double* __restrict g_row) {
  for (std::size_t p = 0; p < d; ++p) {
    const double a = x[p * m + i];
    const double* xp = x + p * m;
    for (std::size_t j = 0; j < m; ++j) g_row[j] += a * xp[j];
  }
}

inline double row_l1(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::abs(a[j] - b[j]);
  return s;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double row_l1_sign(const double* a, const double* b, double* sign, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double diff = a[j] - b[j];
    s += std::abs(diff);
    sign[j] = sgn(diff);
  }
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_inner(a, b, a.cols(), b.rows(), "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((n + kColumnBlock - 1) / kColumnBlock);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t j0 = static_cast<std::size_t>(blk) * kColumnBlock;
    matmul_block(a.raw(), b.raw(), c.raw(), m, k, n, j0, std::min(n, j0 + kColumnBlock));
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_inner(a, b, a.rows(), b.rows(), "matmul_tn");
  const std::size_t m = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  double* cd = c.raw();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    matmul_tn_row(a, b, static_cast<std::size_t>(i), cd + i * n);
  }
  return c;
}

Tensor gram(const Tensor& x) {
  require_matrix(x, "gram");
  const std::size_t d = x.rows(), m = x.cols();
  Tensor g = Tensor::matrix(m, m);
  double* gd = g.raw();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    gram_row(x.raw(), d, m, static_cast<std::size_t>(i), gd + i * m);
  }
  return g;
}

double l1_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("l1_distance: " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  const std::size_t rows = a.ndim() == 0 ? 0 : a.rows();
  const std::size_t n = rows == 0 ? 0 : a.size() / rows;
  std::vector<double> partial(rows, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    partial[i] = row_l1(a.raw() + i * n, b.raw() + i * n, n);
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

Tensor sign_of_difference(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("sign_of_difference: shape mismatch");
  Tensor out(a.dims());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = sgn(a[i] - b[i]);
  return out;
}

double l1_distance_with_sign(const Tensor& a, const Tensor& b, Tensor& sign) {
  if (!a.same_shape(b)) throw ShapeError("l1_distance_with_sign: shape mismatch");
  sign = Tensor(a.dims());
  const std::size_t rows = a.rows();
  const std::size_t n = a.size() / rows;
  std::vector<double> partial(rows, 0.0);
  double* sd = sign.raw();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    partial[i] = row_l1_sign(a.raw() + i * n, b.raw() + i * n, sd + i * n, n);
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

namespace serial {

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_inner(a, b, a.cols(), b.rows(), "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock)
    matmul_block(a.raw(), b.raw(), c.raw(), m, k, n, j0, std::min(n, j0 + kColumnBlock));
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_inner(a, b, a.rows(), b.rows(), "matmul_tn");
  const std::size_t m = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) matmul_tn_row(a, b, i, c.raw() + i * n);
  return c;
}

Tensor gram(const Tensor& x) {
  require_matrix(x, "gram");
  const std::size_t d = x.rows(), m = x.cols();
  Tensor g = Tensor::matrix(m, m);
  for (std::size_t i = 0; i < m; ++i) gram_row(x.raw(), d, m, i, g.raw() + i * m);
  return g;
}

double l1_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("l1_distance: " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  const std::size_t rows = a.ndim() == 0 ? 0 : a.rows();
  const std::size_t n = rows == 0 ? 0 : a.size() / rows;
  double s = 0.0;
  for (std::size_t i = 0; i < rows; ++i) s += row_l1(a.raw() + i * n, b.raw() + i * n, n);
  return s;
}

Tensor sign_of_difference(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("sign_of_difference: shape mismatch");
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = sgn(a[i] - b[i]);
  return out;
}

double l1_distance_with_sign(const Tensor& a, const Tensor& b, Tensor& sign) {
  if (!a.same_shape(b)) throw ShapeError("l1_distance_with_sign: shape mismatch");
  sign = Tensor(a.dims());
  const std::size_t rows = a.rows();
  const std::size_t n = a.size() / rows;
  double s = 0.0;
  for (std::size_t i = 0; i < rows; ++i) s += row_l1_sign(a.raw() + i * n, b.raw() + i * n, sign.raw() + i * n, n);
  return s;
}

}  // namespace serial

}  // namespace derprop::kernels
