#pragma once

// Dense kernels behind the similarity and loss code.
//
// Every kernel has an OpenMP version (derprop::kernels) and a serial reference
// (derprop::kernels::serial). Both accumulate each output entry in the same
// order, so results are bit-identical regardless of thread count; the test
// suite checks this and bench/ compares their speed.

#include "derprop/tensor.hpp"

namespace derprop::kernels {

// C = A * B, A [m x k], B [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A^T * B, A [k x m], B [k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// G = X^T * X for X [d x m]; exactly symmetric.
Tensor gram(const Tensor& x);
// sum_ij |A_ij - B_ij|; per-row partial sums reduced in row order.
double l1_distance(const Tensor& a, const Tensor& b);
// sign(A - B) with sign(0) = 0.
Tensor sign_of_difference(const Tensor& a, const Tensor& b);
// Both of the above in one pass; the sum is bitwise equal to l1_distance.
double l1_distance_with_sign(const Tensor& a, const Tensor& b, Tensor& sign);

namespace serial {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor gram(const Tensor& x);
double l1_distance(const Tensor& a, const Tensor& b);
Tensor sign_of_difference(const Tensor& a, const Tensor& b);
double l1_distance_with_sign(const Tensor& a, const Tensor& b, Tensor& sign);
}  // namespace serial

}  // namespace derprop::kernels
