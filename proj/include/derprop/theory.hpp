#pragma once

// Numerical checks of the well-posedness and boundedness claims behind
// derivative label propagation: rank of the stacked difference operators,
// the linearised feature-recovery system, the L1 bound on high-order
// similarity matrices and the two-candidate cosine counterexample.

#include <cstdint>
#include <string>
#include <vector>

#include "derprop/derivative.hpp"
#include "derprop/tensor.hpp"

namespace derprop {

struct VerificationReport {
  std::string claim;
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // smallest (allowed - observed) seen; negative means violated
  bool pass = false;
  std::vector<std::string> notes;

  void finalize() { pass = violations == 0; }
};

// [I; A_1; ...; A_{D-1}] with forward operators.
struct StackedSystem {
  std::size_t d = 0;
  Tensor matrix;                        // [D(D+1)/2, D]
  std::vector<std::size_t> block_start; // first row of block q

  Tensor block(std::size_t q) const;
};

StackedSystem joint_coefficient_matrix(std::size_t d);

// Stack of the listed forward orders (0 = identity) for arbitrary subsets.
Tensor stack_orders(std::size_t d, const std::vector<std::size_t>& orders);

VerificationReport verify_well_posedness(std::size_t d, double tol);

// Linearised constraint rows anchor^T A_q^T A_q for each order (A_0 = I).
Tensor linearized_constraint_matrix(std::span<const double> anchor, const std::vector<std::size_t>& orders);
std::vector<std::size_t> all_orders(std::size_t d);

struct SolveReport {
  std::vector<double> solution;
  double residual = 0.0;
  std::size_t rank = 0;
  std::size_t null_space_dim = 0;
  double condition = 0.0;  // sigma_max / sigma_min; infinity when rank deficient
  bool unique = false;
};

// Solves M x = targets with row q = anchor^T A_q^T A_q, q = 0..D-1 (the
// linearised constraint system with similarity denominators dropped). A
// rank-deficient M is reported via `unique = false` and a minimum-norm
// least-squares solution.
SolveReport solve_features_from_similarities(std::span<const double> anchor, std::span<const double> targets);
SolveReport solve_linear_system(const Tensor& system, std::span<const double> targets);

// Random anchors and features in dimension d: the full linearised stack must
// have rank d and the solver must reproduce the targets (residual < 1e-8).
VerificationReport verify_recovery(std::size_t trials, std::size_t d, std::uint64_t seed);

struct UniquenessOptions {
  double resolution = 1e-3;    // grid step on the L1 sphere
  double tolerance = 1e-2;     // max-abs residual counted as satisfying the constraints
  double cluster_radius = 0.25;
  bool sign_patterns = true;   // search all orthants, not only the simplex
};

struct ClusterCount {
  std::size_t hits = 0;
  std::size_t clusters = 0;
  std::vector<std::vector<double>> centers;
};

// Brute-force search over the L1 unit sphere in three dimensions: grid points
// whose constraint residual is below tolerance are greedily grouped into balls
// of cluster_radius around the best remaining point.
ClusterCount count_solution_clusters(const Tensor& system, std::span<const double> targets,
                                     const UniquenessOptions& options = {});

struct UniquenessTrial {
  std::vector<double> anchor;
  std::vector<double> truth;
  ClusterCount zero_order;
  ClusterCount full_stack;
  SolveReport solve;
};

// Seeded anchors on the 3-simplex, kept when the linearised system has
// relative smallest singular value >= min_relative_sigma.
std::vector<UniquenessTrial> run_uniqueness_trials(std::size_t count, std::uint64_t seed,
                                                   const UniquenessOptions& options = {},
                                                   double min_relative_sigma = 0.1);

// Joint recovery of two unknown vectors u, v on the 3-simplex from all their
// pairwise similarities (u.u, v.v, u.v) at each derivative order, with no
// known anchor. Brute force over pairs of grid points; a solution and its
// swap (v, u) share a cluster. Reported as an experiment, not asserted.
struct JointRecoveryOptions {
  double resolution = 0.005;
  double tolerance = 0.015;  // max-abs constraint residual counted as a hit
  double cluster_radius = 0.25;
};

struct JointRecoveryTrial {
  std::vector<double> u, v;
  ClusterCount zero_order;  // centers are [x0, x1, x2, y0, y1, y2]
  ClusterCount full_stack;
  // (reverse(u), reverse(v)) meets every constraint exactly: reversing the
  // channel order flips the sign of odd differences and keeps all products.
  bool reversal_is_solution = false;
};

std::vector<JointRecoveryTrial> run_joint_recovery_experiment(std::size_t count, std::uint64_t seed,
                                                              const JointRecoveryOptions& options = {});

struct BoundednessOptions {
  std::size_t trials = 1000;
  std::size_t d = 8;
  std::size_t m = 16;
  std::uint64_t seed = 0;
  bool vary_shape = false;  // draw D in [4, d] and M in [1, m] per trial
  double slack = 1e-9;
};

// Three reports: the final bound, the intermediate Gram bound and the
// lemma chain |D^q v|_1 <= 2^(q-2) |D^2 v|_1.
std::vector<VerificationReport> verify_boundedness(const BoundednessOptions& options);

// |D^q v|_1 <= 2^q |v|_1 on random vectors plus the induced-norm facts.
VerificationReport verify_lemma1(std::size_t trials, std::size_t max_d, std::uint64_t seed);

struct CounterexampleReport {
  double cos_plus = 0.0;
  double cos_minus = 0.0;
  std::vector<double> candidate_plus;   // L2-unit direction of [2+sqrt3, 1, 0]
  std::vector<double> candidate_minus;  // L2-unit direction of [2-sqrt3, 1, 0]
  double q0_target = 0.0;
  double q0_residual_plus = 0.0;
  double q0_residual_minus = 0.0;
  std::size_t constant_anchor_rank = 0;
  bool constant_anchor_disambiguated = false;
  std::vector<double> generic_anchor;
  std::vector<double> generic_first;
  std::vector<double> generic_second;
  double generic_q0_first = 0.0;
  double generic_q0_second = 0.0;
  double generic_q1_first = 0.0;
  double generic_q1_second = 0.0;
  bool generic_disambiguated = false;
  std::size_t generic_rank = 0;
  std::vector<std::string> lines;
};

CounterexampleReport counterexample_demo();

}  // namespace derprop
