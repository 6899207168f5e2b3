#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "derprop/tensor.hpp"

namespace derprop {

// Channel-axis difference schemes. Each applies one step recursively q times:
//   forward         w(i) = u(i+1) - u(i)
//   central         w(i) = (u(i+2) - u(i)) / 2
//   summation       w(i) = u(i+1) + u(i)
//   second_central  w(i) = u(i+1) + u(i-1) - 2 u(i), i ranging over interior channels
enum class DerivativeVariant { kForward, kCentral, kSummation, kSecondCentral };

std::string_view variant_name(DerivativeVariant v);
std::optional<DerivativeVariant> parse_variant(std::string_view name);
inline constexpr DerivativeVariant kAllVariants[] = {DerivativeVariant::kForward, DerivativeVariant::kCentral,
                                                     DerivativeVariant::kSummation, DerivativeVariant::kSecondCentral};

// Channels lost per application: 1 for forward/summation, 2 for the central schemes.
std::size_t shrink_per_order(DerivativeVariant v);

// Output length after q applications; throws DimensionUnderflowError when < 1.
std::size_t output_dim(std::size_t d_in, std::size_t q, DerivativeVariant v);

std::vector<double> diff(std::span<const double> v, std::size_t q, DerivativeVariant variant = DerivativeVariant::kForward);

struct DerivativeOperator {
  std::size_t q = 0;
  std::size_t d_in = 0;
  DerivativeVariant variant = DerivativeVariant::kForward;
  Tensor matrix;  // [d_out, d_in]

  std::size_t d_out() const noexcept { return matrix.rows(); }
};

// Dense operator with matrix * v == diff(v, q, variant). Forward entries come
// from exact integer binomials: A(i, i+p) = (-1)^(q-p) C(q, p).
DerivativeOperator build_operator_matrix(std::size_t q, std::size_t d_in, DerivativeVariant variant = DerivativeVariant::kForward);

// Column-wise diff of a [D, M] map; q = 0 returns a copy.
Tensor apply_operator_columns(const DerivativeOperator& op, const FeatureMap& features);
Tensor diff_columns(const Tensor& features, std::size_t q, DerivativeVariant variant = DerivativeVariant::kForward);

// max_j sum_i |A(i, j)|
double induced_one_norm(const Tensor& a);

// Singular values of a 2-D matrix, descending.
std::vector<double> singular_values(const Tensor& a);

// Count of singular values > tol * sigma_max.
std::size_t numerical_rank(const Tensor& a, double tol);

// C(n, k) via Pascal's rule in 64-bit integers.
std::int64_t binomial(std::size_t n, std::size_t k);

}  // namespace derprop
