#include "derprop/derivative.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace derprop {

std::string_view variant_name(DerivativeVariant v) {
  switch (v) {
    case DerivativeVariant::kForward: return "forward";
    case DerivativeVariant::kCentral: return "central";
    case DerivativeVariant::kSummation: return "summation";
    case DerivativeVariant::kSecondCentral: return "second_central";
  }
  return "unknown";
}

std::optional<DerivativeVariant> parse_variant(std::string_view name) {
  for (DerivativeVariant v : kAllVariants)
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

std::size_t shrink_per_order(DerivativeVariant v) {
  return (v == DerivativeVariant::kCentral || v == DerivativeVariant::kSecondCentral) ? 2 : 1;
}

std::size_t output_dim(std::size_t d_in, std::size_t q, DerivativeVariant v) {
  const std::size_t shrink = q * shrink_per_order(v);
  if (shrink >= d_in) {
    throw DimensionUnderflowError("derivative of order " + std::to_string(q) + " (" + std::string(variant_name(v)) +
                                  ") needs more than " + std::to_string(shrink) + " channels, input has d_in=" +
                                  std::to_string(d_in));
  }
  return d_in - shrink;
}

namespace {

std::vector<double> step(const std::vector<double>& u, DerivativeVariant v) {
  const std::size_t n = u.size();
  std::vector<double> w(n - shrink_per_order(v));
  switch (v) {
    case DerivativeVariant::kForward:
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = u[i + 1] - u[i];
      break;
    case DerivativeVariant::kCentral:
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = (u[i + 2] - u[i]) / 2.0;
      break;
    case DerivativeVariant::kSummation:
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = u[i + 1] + u[i];
      break;
    case DerivativeVariant::kSecondCentral:
      // Output i is centred on input channel i+1.
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = u[i + 2] + u[i] - 2.0 * u[i + 1];
      break;
  }
  return w;
}

// One application of the variant as a [n - shrink, n] matrix.
Tensor step_matrix(std::size_t n, DerivativeVariant v) {
  const std::size_t out = n - shrink_per_order(v);
  Tensor a = Tensor::matrix(out, n);
  for (std::size_t i = 0; i < out; ++i) {
    switch (v) {
      case DerivativeVariant::kForward:
        a(i, i) = -1.0;
        a(i, i + 1) = 1.0;
        break;
      case DerivativeVariant::kCentral:
        a(i, i) = -0.5;
        a(i, i + 2) = 0.5;
        break;
      case DerivativeVariant::kSummation:
        a(i, i) = 1.0;
        a(i, i + 1) = 1.0;
        break;
      case DerivativeVariant::kSecondCentral:
        a(i, i) = 1.0;
        a(i, i + 1) = -2.0;
        a(i, i + 2) = 1.0;
        break;
    }
  }
  return a;
}

}  // namespace

std::vector<double> diff(std::span<const double> v, std::size_t q, DerivativeVariant variant) {
  if (q > 0) output_dim(v.size(), q, variant);
  std::vector<double> u(v.begin(), v.end());
  for (std::size_t k = 0; k < q; ++k) u = step(u, variant);
  return u;
}

std::int64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::vector<std::int64_t> row(n + 1, 0);
  row[0] = 1;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i; j > 0; --j) row[j] += row[j - 1];
  return row[k];
}

DerivativeOperator build_operator_matrix(std::size_t q, std::size_t d_in, DerivativeVariant variant) {
  if (q == 0) throw DimensionUnderflowError("build_operator_matrix: order must be >= 1");
  const std::size_t d_out = output_dim(d_in, q, variant);
  DerivativeOperator op{q, d_in, variant, Tensor::matrix(d_out, d_in)};
  if (variant == DerivativeVariant::kForward) {
    std::vector<std::int64_t> coeff(q + 1);
    for (std::size_t p = 0; p <= q; ++p) {
      const std::int64_t sign = ((q - p) % 2 == 0) ? 1 : -1;
      coeff[p] = sign * binomial(q, p);
    }
    for (std::size_t i = 0; i < d_out; ++i)
      for (std::size_t p = 0; p <= q; ++p) op.matrix(i, i + p) = static_cast<double>(coeff[p]);
    return op;
  }
  // Other schemes: product of one-step matrices. Entries are small dyadic
  // rationals, so the product is exact in doubles.
  Tensor acc = step_matrix(d_in, variant);
  std::size_t n = acc.rows();
  for (std::size_t k = 1; k < q; ++k) {
    const Tensor s = step_matrix(n, variant);
    Tensor next = Tensor::matrix(s.rows(), d_in);
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t p = 0; p < s.cols(); ++p) {
        const double sv = s(i, p);
        if (sv == 0.0) continue;
        for (std::size_t j = 0; j < d_in; ++j) next(i, j) += sv * acc(p, j);
      }
    acc = std::move(next);
    n = acc.rows();
  }
  op.matrix = std::move(acc);
  return op;
}

Tensor diff_columns(const Tensor& features, std::size_t q, DerivativeVariant variant) {
  require_matrix(features, "diff_columns");
  if (q == 0) return features;
  const std::size_t d_out = output_dim(features.rows(), q, variant);
  const std::size_t m = features.cols();
  Tensor out = Tensor::matrix(d_out, m);
  std::vector<double> col(features.rows());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t r = 0; r < features.rows(); ++r) col[r] = features(r, j);
    const std::vector<double> w = diff(col, q, variant);
    for (std::size_t r = 0; r < d_out; ++r) out(r, j) = w[r];
  }
  return out;
}

Tensor apply_operator_columns(const DerivativeOperator& op, const FeatureMap& features) {
  require_matrix(features.values, "apply_operator_columns");
  if (op.d_in != features.d()) {
    throw ShapeError("apply_operator_columns: operator expects d_in=" + std::to_string(op.d_in) +
                     ", features have D=" + std::to_string(features.d()));
  }
  return diff_columns(features.values, op.q, op.variant);
}

double induced_one_norm(const Tensor& a) {
  require_matrix(a, "induced_one_norm");
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

std::vector<double> singular_values(const Tensor& a) {
  require_matrix(a, "singular_values");
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

std::size_t numerical_rank(const Tensor& a, double tol) {
  const std::vector<double> s = singular_values(a);
  if (s.empty() || s.front() == 0.0) return 0;
  const double cutoff = tol * s.front();
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double x) { return x > cutoff; }));
}

}  // namespace derprop
