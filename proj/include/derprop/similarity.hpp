#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "derprop/derivative.hpp"
#include "derprop/tensor.hpp"

namespace derprop {

enum class CosineConvention {
  kL2,     // u.v / (|u|_2 |v|_2)
  kL1Dot,  // u.v / (|u|_1 |v|_1), equal to u.v for L1-normalised inputs
};

double cosine(std::span<const double> u, std::span<const double> v, CosineConvention convention);

enum class SimilarityKind { kPredicted, kGtFromLabels, kGtFromWeakFeatures };

struct SimilarityMatrix {
  Tensor values;  // [M, M]
  SimilarityKind kind = SimilarityKind::kPredicted;

  std::size_t m() const noexcept { return values.rows(); }
};

// S = V^T V. Cost O(M^2 D); M is capped around 1024 at desk scale.
SimilarityMatrix similarity_matrix(const FeatureMap& features);

// (D^q V)^T (D^q V); q = 0 gives similarity_matrix.
SimilarityMatrix derivative_similarity(const FeatureMap& features, std::size_t q,
                                       DerivativeVariant variant = DerivativeVariant::kForward);

// Y^T Y for a one-hot label map.
SimilarityMatrix gt_similarity_from_labels(const Tensor& one_hot_labels);
SimilarityMatrix gt_similarity_from_labels(const LabelMap& labels);

// L~ = L S.
LogitMap propagate(const LogitMap& logits, const SimilarityMatrix& similarity);

enum class KernelNormalization {
  kNone,      // L~ = L K as is
  kColumnL1,  // each column of K divided by its L1 norm, so L~ mixes logits with unit total weight
};

// Divides each column of a square kernel by its L1 norm; all-zero columns stay zero.
Tensor normalize_kernel_columns(const Tensor& kernel);

// S + D^1 S, i.e. V^T (I + A_1^T A_1) V, optionally column-normalised.
Tensor rectification_kernel(const FeatureMap& features, DerivativeVariant variant = DerivativeVariant::kForward,
                            KernelNormalization normalization = KernelNormalization::kNone);

// L~ = L (S + D^1 S). The default applies no normalisation; its magnitude
// grows with M, which saturates the softmax on large grids.
LogitMap derivative_propagate(const LogitMap& logits, const FeatureMap& features,
                              DerivativeVariant variant = DerivativeVariant::kForward,
                              KernelNormalization normalization = KernelNormalization::kNone);

struct BlendSchedule {
  int epoch = 0;
  int total = 1;

  double eta() const;
};

// (1 - eta) Pw + eta Pt. eta = 0 and eta = 1 return the endpoints exactly.
ProbMap blend_pseudo_labels(const ProbMap& weak, const ProbMap& rectified, const BlendSchedule& schedule);

// mask[i] = 1 iff max_c P[c, i] >= tau.
std::vector<std::uint8_t> confidence_mask(const ProbMap& probs, double tau);

}  // namespace derprop
