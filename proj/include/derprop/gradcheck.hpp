#pragma once

#include <cstdint>
#include <vector>

#include "derprop/theory.hpp"

namespace derprop {

struct GradcheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  double threshold = 1e-4;  // max relative error allowed per instance
};

// Finite-difference comparison of every analytic gradient in the loss stack:
// derivative loss for Q = 0..3 with and without the sparsity term, masked CE,
// masked KL and the combined student loss. Coordinates within 1e-3 (or eps)
// of a kink of |.| or of the probability clamp are skipped.
std::vector<VerificationReport> gradient_check_suite(const GradcheckOptions& options);

}  // namespace derprop
