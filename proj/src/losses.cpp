#include "derprop/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "derprop/kernels.hpp"

namespace derprop {

void LossWeights::validate() const {
  if (lambda_ce < 0 || lambda_kl < 0 || lambda_der < 0 || eta < 0) throw ConfigError("loss weights must be >= 0");
}

void DerLossSpec::validate(std::size_t d) const {
  if (eta < 0) throw ConfigError("derivative loss eta must be >= 0");
  if (order_budget > 0) output_dim(d, order_budget, variant);
  if (sparsity_enabled) output_dim(d, order_budget + 1, variant);
}

namespace {

double reduce(double sum, std::size_t count, Reduction r) {
  return r == Reduction::kMean ? sum / static_cast<double>(count) : sum;
}

// A_q^T g for g [d_q, M]; q = 0 is the identity.
Tensor diff_adjoint(const Tensor& g, std::size_t q, std::size_t d_in, DerivativeVariant variant) {
  if (q == 0) return g;
  const DerivativeOperator op = build_operator_matrix(q, d_in, variant);
  return kernels::matmul_tn(op.matrix, g);
}

Tensor sign(const Tensor& t) {
  Tensor out(t.dims());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] > 0 ? 1.0 : (t[i] < 0 ? -1.0 : 0.0);
  return out;
}

// h := h + h^T in place.
// K_n = K diag(1/n), n_j = sum_i |K_ij|. Maps dK_n to dK in place:
// dK_ij = (h_ij - sign(K_ij) <h_:j, K_n,:j>) / n_j. Zero columns pass no gradient.
void column_normalization_backward(const Tensor& raw, Tensor& h) {
  const std::size_t rows = raw.rows(), cols = raw.cols();
  std::vector<double> norms(cols, 0.0), dots(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) norms[j] += std::abs(raw(i, j));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (norms[j] > 0.0) dots[j] += h(i, j) * raw(i, j) / norms[j];
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (norms[j] == 0.0) {
        h(i, j) = 0.0;
        continue;
      }
      const double k = raw(i, j);
      const double sg = k > 0 ? 1.0 : (k < 0 ? -1.0 : 0.0);
      h(i, j) = (h(i, j) - sg * dots[j]) / norms[j];
    }
}

void symmetrize_sum(Tensor& h) {
  const std::size_t n = h.rows();
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) *= 2.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = h(i, j) + h(j, i);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
}

void add_into(Tensor& acc, const Tensor& t, double factor) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += factor * t[i];
}

void check_mask(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask, const char* op) {
  if (!probs.values.same_shape(target.values) || mask.size() != probs.m()) {
    throw ShapeError(std::string(op) + ": probs " + shape_string(probs.values.dims()) + ", target " +
                     shape_string(target.values.dims()) + ", mask length " + std::to_string(mask.size()));
  }
}

std::size_t mask_count(std::span<const std::uint8_t> mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
}

// Chain rule through a column softmax: dz = P * (g - <P, g>).
void softmax_backward_column(const Tensor& probs, const std::vector<double>& g_prob, std::size_t j, Tensor& dz) {
  double inner = 0.0;
  for (std::size_t c = 0; c < probs.rows(); ++c) inner += probs(c, j) * g_prob[c];
  for (std::size_t c = 0; c < probs.rows(); ++c) dz(c, j) = probs(c, j) * (g_prob[c] - inner);
}

}  // namespace

std::vector<Tensor> similarity_stack(const FeatureMap& features, std::size_t order_budget, DerivativeVariant variant) {
  std::vector<Tensor> stack;
  stack.reserve(order_budget + 1);
  for (std::size_t q = 0; q <= order_budget; ++q) stack.push_back(derivative_similarity(features, q, variant).values);
  return stack;
}

std::vector<Tensor> labeled_target_stack(const LabelMap& labels, std::size_t order_budget, LabeledTarget mode) {
  const Tensor ygram = gt_similarity_from_labels(labels).values;
  std::vector<Tensor> stack;
  stack.reserve(order_budget + 1);
  stack.push_back(ygram);
  for (std::size_t q = 1; q <= order_budget; ++q)
    stack.push_back(mode == LabeledTarget::kYGram ? ygram : Tensor(ygram.dims(), 0.0));
  return stack;
}

double derivative_loss(std::span<const Tensor> pred_stack, std::span<const Tensor> gt_stack, const FeatureMap& features,
                       const DerLossSpec& spec) {
  const std::size_t expected = spec.order_budget + 1;
  if (pred_stack.size() != expected || gt_stack.size() != expected) {
    throw ShapeError("derivative_loss: order budget Q=" + std::to_string(spec.order_budget) + " needs " +
                     std::to_string(expected) + " matrices per stack, got " + std::to_string(pred_stack.size()) +
                     " predicted and " + std::to_string(gt_stack.size()) + " target");
  }
  spec.validate(features.d());
  double total = 0.0;
  for (std::size_t q = 0; q < expected; ++q) {
    total += reduce(kernels::l1_distance(pred_stack[q], gt_stack[q]), pred_stack[q].size(), spec.reduction);
  }
  if (spec.sparsity_enabled) {
    const Tensor high = diff_columns(features.values, spec.order_budget + 1, spec.variant);
    total += spec.eta * reduce(entrywise_l1(high), high.size(), spec.reduction);
  }
  return total;
}

namespace {

// `pred_stack`, when given, must equal similarity_stack(features, Q, variant).
ValueAndGrad der_loss_and_grad(const FeatureMap& features, std::span<const Tensor> gt_stack, const DerLossSpec& spec,
                               const std::vector<Tensor>* pred_stack) {
  const std::size_t expected = spec.order_budget + 1;
  if (gt_stack.size() != expected) {
    throw ShapeError("derivative_loss: expected " + std::to_string(expected) + " target matrices, got " +
                     std::to_string(gt_stack.size()));
  }
  spec.validate(features.d());
  const std::size_t d = features.d();
  ValueAndGrad out{0.0, Tensor(features.values.dims(), 0.0)};
  Tensor sign_matrix;
  for (std::size_t q = 0; q < expected; ++q) {
    const Tensor w = diff_columns(features.values, q, spec.variant);
    const Tensor s = pred_stack ? Tensor() : kernels::gram(w);
    const Tensor& sq = pred_stack ? (*pred_stack)[q] : s;
    const double term = kernels::l1_distance_with_sign(sq, gt_stack[q], sign_matrix);
    out.value += reduce(term, sq.size(), spec.reduction);
    const double scale = spec.reduction == Reduction::kMean ? 1.0 / static_cast<double>(sq.size()) : 1.0;
    // d/dV sum G o (V^T B V) = 2 B V G for symmetric G, with B = A_q^T A_q.
    const Tensor wg = kernels::matmul(w, sign_matrix);
    add_into(out.grad, diff_adjoint(wg, q, d, spec.variant), 2.0 * scale);
  }
  if (spec.sparsity_enabled) {
    const Tensor high = diff_columns(features.values, spec.order_budget + 1, spec.variant);
    out.value += spec.eta * reduce(entrywise_l1(high), high.size(), spec.reduction);
    const double scale = spec.reduction == Reduction::kMean ? 1.0 / static_cast<double>(high.size()) : 1.0;
    add_into(out.grad, diff_adjoint(sign(high), spec.order_budget + 1, d, spec.variant), spec.eta * scale);
  }
  return out;
}

}  // namespace

ValueAndGrad derivative_loss_and_grad(const FeatureMap& features, std::span<const Tensor> gt_stack,
                                      const DerLossSpec& spec) {
  return der_loss_and_grad(features, gt_stack, spec, nullptr);
}

double cross_entropy_masked(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask) {
  check_mask(probs, target, mask, "cross_entropy_masked");
  const std::size_t n = mask_count(mask);
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < probs.m(); ++j) {
    if (!mask[j]) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < probs.c(); ++c) {
      const double t = target.values(c, j);
      if (t != 0.0) s -= t * std::log(std::max(probs.values(c, j), kProbClamp));
    }
    total += s;
  }
  return total / static_cast<double>(n);
}

double cross_entropy_masked(const ProbMap& probs, const LabelMap& target, std::span<const std::uint8_t> mask) {
  return cross_entropy_masked(probs, target.as_prob(), mask);
}

double kl_masked(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask) {
  check_mask(probs, target, mask, "kl_masked");
  const std::size_t n = mask_count(mask);
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < probs.m(); ++j) {
    if (!mask[j]) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < probs.c(); ++c) {
      const double t = std::max(target.values(c, j), kProbClamp);
      const double p = std::max(probs.values(c, j), kProbClamp);
      s += t * std::log(t / p);
    }
    total += s;
  }
  return total / static_cast<double>(n);
}

Tensor cross_entropy_masked_grad_logits(const ProbMap& probs, const ProbMap& target,
                                        std::span<const std::uint8_t> mask) {
  check_mask(probs, target, mask, "cross_entropy_masked_grad_logits");
  Tensor dz(probs.values.dims(), 0.0);
  const std::size_t n = mask_count(mask);
  if (n == 0) return dz;
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> g(probs.c());
  for (std::size_t j = 0; j < probs.m(); ++j) {
    if (!mask[j]) continue;
    for (std::size_t c = 0; c < probs.c(); ++c) {
      const double p = probs.values(c, j);
      g[c] = p >= kProbClamp ? -target.values(c, j) / p * inv : 0.0;
    }
    softmax_backward_column(probs.values, g, j, dz);
  }
  return dz;
}

Tensor kl_masked_grad_logits(const ProbMap& probs, const ProbMap& target, std::span<const std::uint8_t> mask) {
  check_mask(probs, target, mask, "kl_masked_grad_logits");
  Tensor dz(probs.values.dims(), 0.0);
  const std::size_t n = mask_count(mask);
  if (n == 0) return dz;
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> g(probs.c());
  for (std::size_t j = 0; j < probs.m(); ++j) {
    if (!mask[j]) continue;
    for (std::size_t c = 0; c < probs.c(); ++c) {
      const double p = probs.values(c, j);
      const double t = std::max(target.values(c, j), kProbClamp);
      g[c] = p >= kProbClamp ? -t / p * inv : 0.0;
    }
    softmax_backward_column(probs.values, g, j, dz);
  }
  return dz;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  return weights.lambda_ce * parts.ce + weights.lambda_kl * parts.kl + weights.lambda_der * parts.der;
}

LossParts student_loss(const StudentInputs& in, const DerLossSpec& spec, const LossWeights& weights,
                       StudentGradients* grads) {
  require_matrix(in.features.values, "student_loss");
  require_matrix(in.logits.values, "student_loss");
  if (in.features.m() != in.logits.m())
    throw ShapeError("student_loss: features and logits disagree on pixel count");

  LossParts parts;
  const ProbMap probs = softmax_columns(in.logits);
  if (grads) {
    grads->d_features = Tensor(in.features.values.dims(), 0.0);
    grads->d_logits = Tensor(in.logits.values.dims(), 0.0);
  }

  if (in.ce_plain_scale != 0.0) {
    parts.ce += in.ce_plain_scale * cross_entropy_masked(probs, in.target, in.mask);
    if (grads) {
      add_into(grads->d_logits, cross_entropy_masked_grad_logits(probs, in.target, in.mask),
               weights.lambda_ce * in.ce_plain_scale);
    }
  }

  // The rectification kernel S + D^1 S shares its Gram matrices with the
  // derivative loss when both use the same variant.
  const bool share = !in.der_targets.empty() && in.ce_rectified_scale != 0.0 && spec.order_budget >= 1 &&
                     spec.variant == in.propagate_variant;
  std::vector<Tensor> pred_stack;
  if (share || (!in.der_targets.empty() && !grads)) pred_stack = similarity_stack(in.features, spec.order_budget, spec.variant);

  if (in.ce_rectified_scale != 0.0) {
    const Tensor raw_kernel = share ? add(pred_stack[0], pred_stack[1]) : rectification_kernel(in.features, in.propagate_variant);
    const bool normalized = in.propagate_normalization == KernelNormalization::kColumnL1;
    const Tensor kernel = normalized ? normalize_kernel_columns(raw_kernel) : raw_kernel;
    const Tensor rectified = kernels::matmul(in.logits.values, kernel);
    const ProbMap rprobs{softmax_columns_raw(rectified)};
    parts.ce += in.ce_rectified_scale * cross_entropy_masked(rprobs, in.target, in.mask);
    if (grads) {
      Tensor g = cross_entropy_masked_grad_logits(rprobs, in.target, in.mask);
      for (double& v : g.values()) v *= weights.lambda_ce * in.ce_rectified_scale;
      // L~ = L K: dL = g K^T, dK = L^T g.
      add_into(grads->d_logits, normalized ? kernels::matmul(g, transpose(kernel)) : kernels::matmul(g, kernel), 1.0);
      Tensor h = kernels::matmul_tn(in.logits.values, g);
      if (normalized) column_normalization_backward(raw_kernel, h);
      symmetrize_sum(h);
      // K = V^T (I + A_1^T A_1) V, so dV = V H + A_1^T (A_1 V) H.
      add_into(grads->d_features, kernels::matmul(in.features.values, h), 1.0);
      const Tensor d1 = diff_columns(in.features.values, 1, in.propagate_variant);
      add_into(grads->d_features, diff_adjoint(kernels::matmul(d1, h), 1, in.features.d(), in.propagate_variant), 1.0);
    }
  }

  if (in.use_kl) {
    parts.kl = kl_masked(probs, in.target, in.mask);
    if (grads) add_into(grads->d_logits, kl_masked_grad_logits(probs, in.target, in.mask), weights.lambda_kl);
  }

  if (!in.der_targets.empty()) {
    if (grads) {
      const ValueAndGrad r = der_loss_and_grad(in.features, in.der_targets, spec, share ? &pred_stack : nullptr);
      parts.der = r.value;
      add_into(grads->d_features, r.grad, weights.lambda_der);
    } else {
      parts.der = derivative_loss(pred_stack, in.der_targets, in.features, spec);
    }
  }
  return parts;
}

StudentGradients loss_gradients(const StudentInputs& inputs, const DerLossSpec& spec, const LossWeights& weights) {
  StudentGradients g;
  student_loss(inputs, spec, weights, &g);
  return g;
}

FiniteDifferenceResult finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic,
                                               const Tensor& x, double eps, const std::function<bool(std::size_t)>& skip) {
  if (!(eps > 0)) throw Error("finite_difference_check: eps must be > 0");
  if (!analytic.same_shape(x)) throw ShapeError("finite_difference_check: gradient and point shapes differ");
  FiniteDifferenceResult result;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (skip && skip(i)) continue;
    probe[i] = x[i] + eps;
    const double fp = f(probe);
    probe[i] = x[i] - eps;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteError("finite_difference_check: non-finite objective at coordinate " + std::to_string(i));
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (rel > result.max_relative_error) result = {rel, i, a, numeric};
  }
  return result;
}

}  // namespace derprop
