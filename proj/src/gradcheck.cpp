#include "derprop/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "derprop/format.hpp"
#include "derprop/losses.hpp"
#include "derprop/rng.hpp"

namespace derprop {

namespace {

using Signature = std::vector<signed char>;

Tensor random_matrix(std::size_t rows, std::size_t cols, double scale, CounterRng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

void append_signs(Signature& sig, const Tensor& t) {
  for (double v : t.values()) sig.push_back(static_cast<signed char>(v > 0 ? 1 : (v < 0 ? -1 : 0)));
}

Signature der_signature(const FeatureMap& v, const std::vector<Tensor>& targets, const DerLossSpec& spec) {
  Signature sig;
  const std::vector<Tensor> pred = similarity_stack(v, spec.order_budget, spec.variant);
  for (std::size_t q = 0; q < pred.size(); ++q) append_signs(sig, subtract(pred[q], targets[q]));
  if (spec.sparsity_enabled) append_signs(sig, diff_columns(v.values, spec.order_budget + 1, spec.variant));
  return sig;
}

Signature clamp_signature(const Tensor& logits) {
  Signature sig;
  for (double p : softmax_columns_raw(logits).values()) sig.push_back(static_cast<signed char>(p < kProbClamp));
  return sig;
}

// Coordinates within this distance of a kink are excluded.
constexpr double kKinkRadius = 1e-3;

// Skips coordinate i when the signature at x + r or x - r differs from the one
// at x, for r = eps and r = kKinkRadius.
std::function<bool(std::size_t)> kink_filter(const Tensor& x, double eps,
                                             const std::function<Signature(const Tensor&)>& signature,
                                             std::size_t& skipped) {
  return [&x, eps, signature, &skipped](std::size_t i) {
    Tensor probe = x;
    const Signature center = signature(probe);
    bool skip = false;
    for (double r : {eps, kKinkRadius})
      for (double sgn : {1.0, -1.0}) {
        if (skip) break;
        probe[i] = x[i] + sgn * r;
        skip = signature(probe) != center;
      }
    if (skip) ++skipped;
    return skip;
  };
}

struct Family {
  std::string name;
  // Returns the worst relative error for one seeded instance.
  std::function<double(CounterRng&, double, std::size_t&)> run;
};

std::vector<Tensor> random_targets(const FeatureMap& like, std::size_t q_max, DerivativeVariant variant,
                                   CounterRng& rng) {
  if (rng.bernoulli(0.5)) {
    const FeatureMap other{random_matrix(like.d(), like.m(), 0.5, rng)};
    return similarity_stack(other, q_max, variant);
  }
  LabelMap labels;
  labels.num_classes = 3;
  for (std::size_t i = 0; i < like.m(); ++i) labels.classes.push_back(static_cast<int>(rng.below(3)));
  return labeled_target_stack(labels, q_max, rng.bernoulli(0.5) ? LabeledTarget::kYGram : LabeledTarget::kZero);
}

std::vector<std::uint8_t> random_mask(std::size_t m, CounterRng& rng) {
  std::vector<std::uint8_t> mask(m);
  for (auto& b : mask) b = rng.bernoulli(0.7) ? 1 : 0;
  return mask;
}

double derivative_family(std::size_t q, bool sparsity, CounterRng& rng, double eps, std::size_t& skipped) {
  DerLossSpec spec;
  spec.order_budget = q;
  spec.sparsity_enabled = sparsity;
  const std::size_t d = q + 2 + rng.below(3), m = 3 + rng.below(4);
  const FeatureMap v{random_matrix(d, m, 0.5, rng)};
  const std::vector<Tensor> targets = random_targets(v, q, spec.variant, rng);
  const ValueAndGrad vg = derivative_loss_and_grad(v, targets, spec);
  auto f = [&](const Tensor& x) {
    const FeatureMap fx{x};
    return derivative_loss(similarity_stack(fx, q, spec.variant), targets, fx, spec);
  };
  auto sig = [&](const Tensor& x) { return der_signature(FeatureMap{x}, targets, spec); };
  return finite_difference_check(f, vg.grad, v.values, eps, kink_filter(v.values, eps, sig, skipped))
      .max_relative_error;
}

double ce_family(CounterRng& rng, double eps, std::size_t& skipped) {
  const std::size_t c = 2 + rng.below(3), m = 3 + rng.below(4);
  const Tensor logits = random_matrix(c, m, 1.5, rng);
  const ProbMap target = softmax_columns(LogitMap{random_matrix(c, m, 2.0, rng)});
  const std::vector<std::uint8_t> mask = random_mask(m, rng);
  const Tensor grad = cross_entropy_masked_grad_logits(softmax_columns(LogitMap{logits}), target, mask);
  auto f = [&](const Tensor& x) { return cross_entropy_masked(softmax_columns(LogitMap{x}), target, mask); };
  return finite_difference_check(f, grad, logits, eps, kink_filter(logits, eps, clamp_signature, skipped))
      .max_relative_error;
}

double kl_family(CounterRng& rng, double eps, std::size_t& skipped) {
  const std::size_t c = 2 + rng.below(3), m = 3 + rng.below(4);
  const Tensor logits = random_matrix(c, m, 1.5, rng);
  const ProbMap target = softmax_columns(LogitMap{random_matrix(c, m, 2.0, rng)});
  const std::vector<std::uint8_t> mask = random_mask(m, rng);
  const Tensor grad = kl_masked_grad_logits(softmax_columns(LogitMap{logits}), target, mask);
  auto f = [&](const Tensor& x) { return kl_masked(softmax_columns(LogitMap{x}), target, mask); };
  return finite_difference_check(f, grad, logits, eps, kink_filter(logits, eps, clamp_signature, skipped))
      .max_relative_error;
}

double total_family(CounterRng& rng, double eps, std::size_t& skipped) {
  const std::size_t q = rng.below(3);
  const std::size_t d = q + 2 + rng.below(3), m = 3 + rng.below(4), c = 2 + rng.below(3);
  DerLossSpec spec;
  spec.order_budget = q;
  spec.sparsity_enabled = rng.bernoulli(0.5);
  // Mean reduction, as in training. Summed derivative terms reach the hundreds,
  // and the rounding error of f / eps then swamps gradient entries near 1e-6.
  spec.reduction = Reduction::kMean;
  const LossWeights weights;

  StudentInputs in;
  in.features = FeatureMap{random_matrix(d, m, 0.5, rng)};
  in.logits = LogitMap{random_matrix(c, m, 1.0, rng)};
  in.target = softmax_columns(LogitMap{random_matrix(c, m, 2.0, rng)});
  in.mask = random_mask(m, rng);
  in.ce_plain_scale = 0.5;
  in.ce_rectified_scale = 0.5;
  in.use_kl = true;
  in.der_targets = random_targets(in.features, q, spec.variant, rng);
  if (rng.bernoulli(0.5)) in.propagate_normalization = KernelNormalization::kColumnL1;

  // Joint variable: features stacked over logits.
  Tensor x = Tensor::matrix(d + c, m);
  for (std::size_t i = 0; i < d * m; ++i) x[i] = in.features.values[i];
  for (std::size_t i = 0; i < c * m; ++i) x[d * m + i] = in.logits.values[i];
  auto split = [&](const Tensor& joint) {
    StudentInputs s = in;
    for (std::size_t i = 0; i < d * m; ++i) s.features.values[i] = joint[i];
    for (std::size_t i = 0; i < c * m; ++i) s.logits.values[i] = joint[d * m + i];
    return s;
  };

  const StudentGradients g = loss_gradients(in, spec, weights);
  Tensor analytic = Tensor::matrix(d + c, m);
  for (std::size_t i = 0; i < d * m; ++i) analytic[i] = g.d_features[i];
  for (std::size_t i = 0; i < c * m; ++i) analytic[d * m + i] = g.d_logits[i];

  auto f = [&](const Tensor& joint) { return total_loss(student_loss(split(joint), spec, weights), weights); };
  auto sig = [&](const Tensor& joint) {
    const StudentInputs s = split(joint);
    Signature out = der_signature(s.features, s.der_targets, spec);
    const Signature plain = clamp_signature(s.logits.values);
    out.insert(out.end(), plain.begin(), plain.end());
    const Tensor rectified =
        derivative_propagate(s.logits, s.features, s.propagate_variant, s.propagate_normalization).values;
    const Signature rect = clamp_signature(rectified);
    out.insert(out.end(), rect.begin(), rect.end());
    if (s.propagate_normalization == KernelNormalization::kColumnL1)
      append_signs(out, rectification_kernel(s.features, s.propagate_variant));
    return out;
  };
  return finite_difference_check(f, analytic, x, eps, kink_filter(x, eps, sig, skipped)).max_relative_error;
}

}  // namespace

std::vector<VerificationReport> gradient_check_suite(const GradcheckOptions& opt) {
  std::vector<Family> families;
  for (std::size_t q = 0; q <= 3; ++q)
    for (bool sparsity : {true, false})
      families.push_back({"gradient.derivative_loss.Q" + std::to_string(q) + (sparsity ? ".sparsity_on" : ".sparsity_off"),
                          [q, sparsity](CounterRng& rng, double eps, std::size_t& skipped) {
                            return derivative_family(q, sparsity, rng, eps, skipped);
                          }});
  families.push_back({"gradient.cross_entropy", ce_family});
  families.push_back({"gradient.kl", kl_family});
  families.push_back({"gradient.total", total_family});

  const CounterRng root(opt.seed);
  std::vector<VerificationReport> reports;
  for (std::size_t f = 0; f < families.size(); ++f) {
    VerificationReport r;
    r.claim = families[f].name;
    r.worst_margin = std::numeric_limits<double>::infinity();
    std::size_t skipped = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      CounterRng rng = root.split(f).split(t);
      const double err = families[f].run(rng, opt.eps, skipped);
      ++r.instances;
      worst = std::max(worst, err);
      r.worst_margin = std::min(r.worst_margin, opt.threshold - err);
      if (!(err < opt.threshold)) ++r.violations;
    }
    r.notes.push_back("max relative error " + format_double(worst) + " (threshold " + format_double(opt.threshold) +
                      "), kink coordinates skipped: " + std::to_string(skipped));
    r.finalize();
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace derprop
