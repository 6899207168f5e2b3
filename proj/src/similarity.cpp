#include "derprop/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "derprop/kernels.hpp"

namespace derprop {

double cosine(std::span<const double> u, std::span<const double> v, CosineConvention convention) {
  if (u.size() != v.size())
    throw ShapeError("cosine: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()) + " differ");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    if (convention == CosineConvention::kL2) {
      nu += u[i] * u[i];
      nv += v[i] * v[i];
    } else {
      nu += std::abs(u[i]);
      nv += std::abs(v[i]);
    }
  }
  if (convention == CosineConvention::kL2) {
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
  }
  const char* norm_name = convention == CosineConvention::kL2 ? "L2" : "L1";
  if (nu <= 1e-12) throw ZeroVectorError(std::string("cosine: first argument has ") + norm_name + " norm <= 1e-12");
  if (nv <= 1e-12) throw ZeroVectorError(std::string("cosine: second argument has ") + norm_name + " norm <= 1e-12");
  return dot / (nu * nv);
}

SimilarityMatrix similarity_matrix(const FeatureMap& features) {
  require_matrix(features.values, "similarity_matrix");
  return {kernels::gram(features.values), SimilarityKind::kPredicted};
}

SimilarityMatrix derivative_similarity(const FeatureMap& features, std::size_t q, DerivativeVariant variant) {
  require_matrix(features.values, "derivative_similarity");
  if (q == 0) return similarity_matrix(features);
  return {kernels::gram(diff_columns(features.values, q, variant)), SimilarityKind::kPredicted};
}

SimilarityMatrix gt_similarity_from_labels(const Tensor& one_hot_labels) {
  return gt_similarity_from_labels(labels_from_one_hot(one_hot_labels));
}

SimilarityMatrix gt_similarity_from_labels(const LabelMap& labels) {
  const std::size_t m = labels.m();
  Tensor s = Tensor::matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) s(i, j) = labels.classes[i] == labels.classes[j] ? 1.0 : 0.0;
  return {std::move(s), SimilarityKind::kGtFromLabels};
}

LogitMap propagate(const LogitMap& logits, const SimilarityMatrix& similarity) {
  require_matrix(logits.values, "propagate");
  require_matrix(similarity.values, "propagate");
  if (logits.m() != similarity.values.rows() || similarity.values.rows() != similarity.values.cols()) {
    throw ShapeError("propagate: logits " + shape_string(logits.values.dims()) + " vs similarity " +
                     shape_string(similarity.values.dims()));
  }
  return {kernels::matmul(logits.values, similarity.values)};
}

Tensor normalize_kernel_columns(const Tensor& kernel) {
  require_matrix(kernel, "normalize_kernel_columns");
  const std::size_t rows = kernel.rows(), cols = kernel.cols();
  std::vector<double> norms(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) norms[j] += std::abs(kernel(i, j));
  Tensor out = kernel;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (norms[j] > 0.0) out(i, j) /= norms[j];
  return out;
}

Tensor rectification_kernel(const FeatureMap& features, DerivativeVariant variant, KernelNormalization normalization) {
  require_matrix(features.values, "rectification_kernel");
  if (features.d() < 2) throw DimensionUnderflowError("derivative_propagate needs D >= 2");
  const Tensor s = kernels::gram(features.values);
  const Tensor s1 = kernels::gram(diff_columns(features.values, 1, variant));
  const Tensor k = add(s, s1);
  return normalization == KernelNormalization::kColumnL1 ? normalize_kernel_columns(k) : k;
}

LogitMap derivative_propagate(const LogitMap& logits, const FeatureMap& features, DerivativeVariant variant,
                              KernelNormalization normalization) {
  if (logits.m() != features.m()) {
    throw ShapeError("derivative_propagate: logits have M=" + std::to_string(logits.m()) + ", features have M=" +
                     std::to_string(features.m()));
  }
  return propagate(logits,
                   SimilarityMatrix{rectification_kernel(features, variant, normalization), SimilarityKind::kPredicted});
}

double BlendSchedule::eta() const {
  if (total < 1) throw Error("blend schedule: total epochs must be >= 1");
  if (epoch < 0 || epoch > total) throw Error("blend schedule: epoch outside [0, total]");
  return static_cast<double>(epoch) / static_cast<double>(total);
}

ProbMap blend_pseudo_labels(const ProbMap& weak, const ProbMap& rectified, const BlendSchedule& schedule) {
  if (!weak.values.same_shape(rectified.values)) {
    throw ShapeError("blend_pseudo_labels: " + shape_string(weak.values.dims()) + " vs " +
                     shape_string(rectified.values.dims()));
  }
  const double eta = schedule.eta();
  if (eta == 0.0) return weak;
  if (eta == 1.0) return rectified;
  return {axpby(1.0 - eta, weak.values, eta, rectified.values)};
}

std::vector<std::uint8_t> confidence_mask(const ProbMap& probs, double tau) {
  require_matrix(probs.values, "confidence_mask");
  std::vector<std::uint8_t> mask(probs.m(), 0);
  for (std::size_t j = 0; j < probs.m(); ++j) {
    double mx = probs.values(0, j);
    for (std::size_t c = 1; c < probs.c(); ++c) mx = std::max(mx, probs.values(c, j));
    mask[j] = mx >= tau ? 1 : 0;
  }
  return mask;
}

}  // namespace derprop
