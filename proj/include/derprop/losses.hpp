#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "derprop/derivative.hpp"
#include "derprop/similarity.hpp"
#include "derprop/tensor.hpp"

namespace derprop {

struct LossWeights {
  double lambda_ce = 0.5;
  double lambda_kl = 0.25;
  double lambda_der = 0.5;
  double eta = 0.5;

  void validate() const;
};

// What labeled high-order similarity terms are compared against.
enum class LabeledTarget {
  kYGram,  // Y^T Y at every order
  kZero,   // Y^T Y at order 0, zero matrix above
};

enum class Reduction {
  kSum,   // entrywise L1 sums
  kMean,  // each term divided by its entry count
};

struct DerLossSpec {
  std::size_t order_budget = 1;  // Q
  double eta = 0.5;
  DerivativeVariant variant = DerivativeVariant::kForward;
  bool sparsity_enabled = true;
  LabeledTarget labeled_high_order_target = LabeledTarget::kYGram;
  Reduction reduction = Reduction::kSum;

  // Throws DimensionUnderflowError if order Q (or Q+1 with sparsity) does not fit in d channels.
  void validate(std::size_t d) const;
};

// [D^0 S, D^1 S, ..., D^Q S] for the given features.
std::vector<Tensor> similarity_stack(const FeatureMap& features, std::size_t order_budget, DerivativeVariant variant);

// Targets for a labeled image: Y^T Y at q = 0, then per LabeledTarget.
std::vector<Tensor> labeled_target_stack(const LabelMap& labels, std::size_t order_budget, LabeledTarget mode);

// sum_q |D^q S_pred - D^q S_gt|_1 + eta |D^(Q+1) V|_1 (last term only with sparsity).
double derivative_loss(std::span<const Tensor> pred_stack, std::span<const Tensor> gt_stack, const FeatureMap& features,
                       const DerLossSpec& spec);

struct ValueAndGrad {
  double value = 0.0;
  Tensor grad;
};

// Derivative loss with the prediction stack built from `features`, plus its
// (sub)gradient w.r.t. the features. Targets are constants.
ValueAndGrad derivative_loss_and_grad(const FeatureMap& features, std::span<const Tensor> gt_stack,
                                      const DerLossSpec& spec);

inline constexpr double kProbClamp = 1e-12;

// Mean over masked pixels of -sum_c t log max(P, 1e-12); 0 for an empty mask.
double cross_entropy_masked(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask);
double cross_entropy_masked(const ProbMap& probs, const LabelMap& target, std::span<const std::uint8_t> mask);

// Mean over masked pixels of sum_c t log(t / P), t and P clamped at 1e-12.
// The target is the reference distribution and receives no gradient.
double kl_masked(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask);

// Gradients of the two losses above w.r.t. the logits that produced `probs`.
Tensor cross_entropy_masked_grad_logits(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask);
Tensor kl_masked_grad_logits(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask);

struct LossParts {
  double ce = 0.0;
  double kl = 0.0;
  double der = 0.0;
};

double total_loss(const LossParts& parts, const LossWeights& weights);

// Everything the loss stack needs about one student branch (labeled image or
// strongly augmented unlabeled image). The target, mask and derivative
// targets come from the teacher side and are treated as constants.
struct StudentInputs {
  FeatureMap features;  // V_s, L1-normalised
  LogitMap logits;      // L_s
  ProbMap target;
  std::vector<std::uint8_t> mask;
  double ce_plain_scale = 1.0;      // weight on CE(softmax(L), target)
  double ce_rectified_scale = 0.0;  // weight on CE(softmax(L (S + D^1 S)), target); 0 disables
  bool use_kl = false;
  std::vector<Tensor> der_targets;  // empty disables the derivative loss
  DerivativeVariant propagate_variant = DerivativeVariant::kForward;
  KernelNormalization propagate_normalization = KernelNormalization::kNone;
};

struct StudentGradients {
  Tensor d_features;
  Tensor d_logits;
};

// Loss parts for one student branch; fills `grads` with the partials of
// total_loss(parts, weights) when non-null.
LossParts student_loss(const StudentInputs& inputs, const DerLossSpec& spec, const LossWeights& weights,
                       StudentGradients* grads = nullptr);

// Convenience wrapper returning gradients w.r.t. V_s and L_s.
StudentGradients loss_gradients(const StudentInputs& inputs, const DerLossSpec& spec, const LossWeights& weights);

struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central differences per coordinate, relative error with denominator
// max(|a|, |b|, 1e-8). Throws NonFiniteError naming the coordinate if f is
// non-finite at a perturbed point. `skip` (optional) excludes coordinates.
FiniteDifferenceResult finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic,
                                               const Tensor& x, double eps,
                                               const std::function<bool(std::size_t)>& skip = {});

}  // namespace derprop
