#include "derprop/theory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "derprop/format.hpp"
#include "derprop/kernels.hpp"
#include "derprop/rng.hpp"

namespace derprop {

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

Tensor forward_block(std::size_t d, std::size_t q) {
  return q == 0 ? Tensor::identity(d) : build_operator_matrix(q, d, DerivativeVariant::kForward).matrix;
}

double pow2(int e) { return std::ldexp(1.0, e); }

}  // namespace

Tensor StackedSystem::block(std::size_t q) const {
  const std::size_t rows = d - q;
  Tensor out = Tensor::matrix(rows, d);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = matrix(block_start[q] + i, j);
  return out;
}

Tensor stack_orders(std::size_t d, const std::vector<std::size_t>& orders) {
  std::size_t rows = 0;
  for (std::size_t q : orders) rows += d - q;
  Tensor out = Tensor::matrix(rows, d);
  std::size_t r = 0;
  for (std::size_t q : orders) {
    const Tensor b = forward_block(d, q);
    for (std::size_t i = 0; i < b.rows(); ++i, ++r)
      for (std::size_t j = 0; j < d; ++j) out(r, j) = b(i, j);
  }
  return out;
}

std::vector<std::size_t> all_orders(std::size_t d) {
  std::vector<std::size_t> orders(d);
  std::iota(orders.begin(), orders.end(), std::size_t{0});
  return orders;
}

StackedSystem joint_coefficient_matrix(std::size_t d) {
  if (d < 2) throw DimensionUnderflowError("joint_coefficient_matrix needs D >= 2");
  StackedSystem sys;
  sys.d = d;
  std::size_t start = 0;
  for (std::size_t q = 0; q < d; ++q) {
    sys.block_start.push_back(start);
    start += d - q;
  }
  sys.matrix = stack_orders(d, all_orders(d));
  return sys;
}

VerificationReport verify_well_posedness(std::size_t d, double tol) {
  VerificationReport report;
  report.claim = "well_posedness: rank([I; A_1; ...; A_{D-1}]) == D and rank(A_q) == D - q, D=" + std::to_string(d);
  report.worst_margin = std::numeric_limits<double>::infinity();
  const StackedSystem sys = joint_coefficient_matrix(d);

  auto check = [&](const Tensor& m, std::size_t expected, const std::string& label) {
    const std::vector<double> s = singular_values(m);
    const std::size_t rank = numerical_rank(m, tol);
    ++report.instances;
    // Margin: how far the last expected-nonzero singular value clears the cutoff.
    const double rel = expected == 0 ? 1.0 : s[expected - 1] / s.front();
    report.worst_margin = std::min(report.worst_margin, rel - tol);
    if (rank != expected) {
      ++report.violations;
      report.notes.push_back(label + ": rank " + std::to_string(rank) + ", expected " + std::to_string(expected));
    }
  };

  check(sys.matrix, d, "stacked");
  for (std::size_t q = 1; q < d; ++q) check(sys.block(q), d - q, "A_" + std::to_string(q));
  report.notes.push_back("stacked matrix is " + std::to_string(sys.matrix.rows()) + "x" + std::to_string(d));
  report.finalize();
  return report;
}

Tensor linearized_constraint_matrix(std::span<const double> anchor, const std::vector<std::size_t>& orders) {
  const std::size_t d = anchor.size();
  Tensor rows = Tensor::matrix(orders.size(), d);
  for (std::size_t r = 0; r < orders.size(); ++r) {
    const std::size_t q = orders[r];
    // anchor^T A_q^T A_q = (A_q^T (A_q anchor))^T
    const Tensor a = forward_block(d, q);
    std::vector<double> au(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) au[i] += a(i, j) * anchor[j];
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * au[i];
      rows(r, j) = s;
    }
  }
  return rows;
}

SolveReport solve_linear_system(const Tensor& system, std::span<const double> targets) {
  require_matrix(system, "solve_linear_system");
  if (targets.size() != system.rows()) throw ShapeError("solve_linear_system: target count differs from rows");
  const Eigen::MatrixXd m = to_eigen(system);
  Eigen::VectorXd t(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) t(i) = targets[i];

  SolveReport out;
  const std::vector<double> s = singular_values(system);
  out.rank = numerical_rank(system, 1e-10);
  out.null_space_dim = system.cols() - out.rank;
  out.unique = out.rank == system.cols();
  out.condition = out.unique ? s.front() / s.back() : std::numeric_limits<double>::infinity();

  Eigen::VectorXd x;
  if (out.unique && system.rows() == system.cols()) {
    x = m.fullPivLu().solve(t);
  } else {
    x = m.completeOrthogonalDecomposition().solve(t);
  }
  out.solution.assign(x.data(), x.data() + x.size());
  out.residual = (m * x - t).norm();
  return out;
}

SolveReport solve_features_from_similarities(std::span<const double> anchor, std::span<const double> targets) {
  const std::size_t d = anchor.size();
  if (d < 2) throw DimensionUnderflowError("solve_features_from_similarities needs D >= 2");
  if (targets.size() != d) {
    throw ShapeError("solve_features_from_similarities: need " + std::to_string(d) + " targets (q = 0..D-1), got " +
                     std::to_string(targets.size()));
  }
  return solve_linear_system(linearized_constraint_matrix(anchor, all_orders(d)), targets);
}

VerificationReport verify_recovery(std::size_t trials, std::size_t d, std::uint64_t seed) {
  if (d < 2) throw DimensionUnderflowError("verify_recovery needs D >= 2");
  VerificationReport report;
  report.claim = "recovery: full derivative stack determines the features, D=" + std::to_string(d);
  report.worst_margin = std::numeric_limits<double>::infinity();
  const CounterRng root(seed);
  std::size_t worst_trial = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    CounterRng rng = root.split(t);
    std::vector<double> anchor(d), truth(d);
    for (double& x : anchor) x = rng.normal();
    for (double& x : truth) x = rng.normal();
    const Tensor system = linearized_constraint_matrix(anchor, all_orders(d));
    std::vector<double> targets(d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) targets[r] += system(r, c) * truth[c];
    double scale = 0.0;
    for (double x : targets) scale = std::max(scale, std::abs(x));
    const SolveReport solved = solve_linear_system(system, targets);
    const double allowed = 1e-8 * std::max(1.0, scale);
    const double margin = allowed - solved.residual;
    ++report.instances;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      worst_trial = t;
    }
    if (!solved.unique || margin < 0) ++report.violations;
  }
  report.notes.push_back("tightest trial " + std::to_string(worst_trial) + "; residual tolerance 1e-8 x max|target|");
  report.finalize();
  return report;
}

ClusterCount count_solution_clusters(const Tensor& system, std::span<const double> targets,
                                     const UniquenessOptions& options) {
  require_matrix(system, "count_solution_clusters");
  if (system.cols() != 3) throw ShapeError("count_solution_clusters searches the 3-D L1 sphere only");
  const std::size_t k = system.rows();
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / options.resolution));

  struct Hit {
    double residual;
    std::array<double, 3> x;
  };
  std::vector<Hit> hits;
  const int patterns = options.sign_patterns ? 8 : 1;
  for (std::int64_t i = 0; i <= steps; ++i) {
    for (std::int64_t j = 0; j <= steps - i; ++j) {
      const double base[3] = {static_cast<double>(i) / static_cast<double>(steps),
                              static_cast<double>(j) / static_cast<double>(steps),
                              static_cast<double>(steps - i - j) / static_cast<double>(steps)};
      for (int p = 0; p < patterns; ++p) {
        // Skip sign flips of zero coordinates; they duplicate points.
        bool dup = false;
        std::array<double, 3> x{};
        for (int c = 0; c < 3; ++c) {
          const bool neg = (p >> c) & 1;
          if (neg && base[c] == 0.0) dup = true;
          x[c] = neg ? -base[c] : base[c];
        }
        if (dup) continue;
        double worst = 0.0;
        for (std::size_t r = 0; r < k && worst < options.tolerance; ++r) {
          const double v = system(r, 0) * x[0] + system(r, 1) * x[1] + system(r, 2) * x[2] - targets[r];
          worst = std::max(worst, std::abs(v));
        }
        if (worst < options.tolerance) hits.push_back({worst, x});
      }
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.residual < b.residual; });

  ClusterCount out;
  out.hits = hits.size();
  const double r2 = options.cluster_radius * options.cluster_radius;
  for (const Hit& h : hits) {
    bool covered = false;
    for (const auto& c : out.centers) {
      const double dx = h.x[0] - c[0], dy = h.x[1] - c[1], dz = h.x[2] - c[2];
      if (dx * dx + dy * dy + dz * dz <= r2) {
        covered = true;
        break;
      }
    }
    if (!covered) out.centers.push_back({h.x[0], h.x[1], h.x[2]});
  }
  out.clusters = out.centers.size();
  return out;
}

std::vector<UniquenessTrial> run_uniqueness_trials(std::size_t count, std::uint64_t seed,
                                                   const UniquenessOptions& options, double min_relative_sigma) {
  CounterRng rng(seed);
  auto simplex_point = [&]() {
    // Normalised exponentials give a uniform draw on the simplex.
    std::vector<double> v(3);
    double s = 0.0;
    for (double& x : v) {
      x = -std::log(1.0 - rng.uniform());
      s += x;
    }
    for (double& x : v) x /= s;
    return v;
  };

  std::vector<UniquenessTrial> trials;
  while (trials.size() < count) {
    UniquenessTrial t;
    t.anchor = simplex_point();
    const Tensor full = linearized_constraint_matrix(t.anchor, all_orders(3));
    const std::vector<double> s = singular_values(full);
    if (s.back() < min_relative_sigma * s.front()) continue;
    t.truth = simplex_point();
    std::vector<double> targets(3, 0.0);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) targets[r] += full(r, c) * t.truth[c];
    const Tensor q0 = linearized_constraint_matrix(t.anchor, {0});
    t.zero_order = count_solution_clusters(q0, std::span<const double>(targets.data(), 1), options);
    t.full_stack = count_solution_clusters(full, targets, options);
    t.solve = solve_linear_system(full, targets);
    trials.push_back(std::move(t));
  }
  return trials;
}

namespace {

// [D^0 x . D^0 y, D^1 x . D^1 y, D^2 x . D^2 y] for x, y in R^3.
std::array<double, 3> order_products(const std::array<double, 3>& x, const std::array<double, 3>& y) {
  const double x1[2] = {x[1] - x[0], x[2] - x[1]}, y1[2] = {y[1] - y[0], y[2] - y[1]};
  return {x[0] * y[0] + x[1] * y[1] + x[2] * y[2], x1[0] * y1[0] + x1[1] * y1[1], (x1[1] - x1[0]) * (y1[1] - y1[0])};
}

// Constraint values for the pair: orders 0..2 of u.u, v.v and u.v.
std::array<double, 9> joint_constraints(const std::array<double, 3>& u, const std::array<double, 3>& v) {
  const auto uu = order_products(u, u), vv = order_products(v, v), uv = order_products(u, v);
  return {uu[0], vv[0], uv[0], uu[1], vv[1], uv[1], uu[2], vv[2], uv[2]};
}

ClusterCount cluster_pairs(std::vector<std::pair<double, std::array<double, 6>>> hits, double radius) {
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ClusterCount out;
  out.hits = hits.size();
  auto near = [radius](const std::array<double, 6>& h, const std::vector<double>& c, bool swapped) {
    for (int k = 0; k < 6; ++k)
      if (std::abs(h[swapped ? (k + 3) % 6 : k] - c[k]) > radius) return false;
    return true;
  };
  for (const auto& [residual, x] : hits) {
    bool covered = false;
    for (const auto& c : out.centers) {
      if (near(x, c, false) || near(x, c, true)) {
        covered = true;
        break;
      }
    }
    if (!covered) out.centers.emplace_back(x.begin(), x.end());
  }
  out.clusters = out.centers.size();
  return out;
}

}  // namespace

std::vector<JointRecoveryTrial> run_joint_recovery_experiment(std::size_t count, std::uint64_t seed,
                                                              const JointRecoveryOptions& options) {
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / options.resolution));
  std::vector<std::array<double, 3>> grid;
  for (std::int64_t i = 0; i <= steps; ++i)
    for (std::int64_t j = 0; j <= steps - i; ++j)
      grid.push_back({static_cast<double>(i) / static_cast<double>(steps),
                      static_cast<double>(j) / static_cast<double>(steps),
                      static_cast<double>(steps - i - j) / static_cast<double>(steps)});
  std::vector<std::array<double, 3>> self(grid.size());
  for (std::size_t a = 0; a < grid.size(); ++a) self[a] = order_products(grid[a], grid[a]);

  CounterRng rng(seed);
  auto simplex_point = [&]() {
    std::array<double, 3> v{};
    double s = 0.0;
    for (double& x : v) {
      x = -std::log(1.0 - rng.uniform());
      s += x;
    }
    for (double& x : v) x /= s;
    return v;
  };

  std::vector<JointRecoveryTrial> trials;
  for (std::size_t t = 0; t < count; ++t) {
    const std::array<double, 3> u = simplex_point(), v = simplex_point();
    const std::array<double, 9> target = joint_constraints(u, v);
    std::vector<std::pair<double, std::array<double, 6>>> q0_hits, full_hits;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      // Self terms prune most candidates before the cross products.
      const double ra0 = std::abs(self[a][0] - target[0]);
      if (ra0 >= options.tolerance) continue;
      const double ra_full = std::max({ra0, std::abs(self[a][1] - target[3]), std::abs(self[a][2] - target[6])});
      for (std::size_t b = 0; b < grid.size(); ++b) {
        const double rb0 = std::abs(self[b][0] - target[1]);
        if (rb0 >= options.tolerance) continue;
        const auto cross = order_products(grid[a], grid[b]);
        const double r0 = std::max({ra0, rb0, std::abs(cross[0] - target[2])});
        if (r0 >= options.tolerance) continue;
        const std::array<double, 6> x{grid[a][0], grid[a][1], grid[a][2], grid[b][0], grid[b][1], grid[b][2]};
        q0_hits.push_back({r0, x});
        const double rf = std::max({r0, ra_full, std::abs(self[b][1] - target[4]), std::abs(self[b][2] - target[7]),
                                    std::abs(cross[1] - target[5]), std::abs(cross[2] - target[8])});
        if (rf < options.tolerance) full_hits.push_back({rf, x});
      }
    }
    JointRecoveryTrial trial;
    trial.u.assign(u.begin(), u.end());
    trial.v.assign(v.begin(), v.end());
    trial.zero_order = cluster_pairs(std::move(q0_hits), options.cluster_radius);
    trial.full_stack = cluster_pairs(std::move(full_hits), options.cluster_radius);
    const std::array<double, 9> reversed = joint_constraints({u[2], u[1], u[0]}, {v[2], v[1], v[0]});
    double worst = 0.0;
    for (int k = 0; k < 9; ++k) worst = std::max(worst, std::abs(reversed[k] - target[k]));
    trial.reversal_is_solution = worst <= 1e-15;
    trials.push_back(std::move(trial));
  }
  return trials;
}

std::vector<VerificationReport> verify_boundedness(const BoundednessOptions& opt) {
  if (opt.d < 4) throw DimensionUnderflowError("verify_boundedness needs D >= 4 so that q in {2..D-1} is non-empty");
  if (opt.m < 1) throw ShapeError("verify_boundedness needs M >= 1");

  struct TrialResult {
    std::size_t checks = 0;
    std::size_t bound_violations = 0, inter_violations = 0, chain_violations = 0;
    double bound_margin = std::numeric_limits<double>::infinity();
    double inter_margin = std::numeric_limits<double>::infinity();
    double chain_margin = std::numeric_limits<double>::infinity();
    std::size_t chain_checks = 0;
    std::string first_violation;
  };
  std::vector<TrialResult> results(opt.trials);
  const CounterRng root(opt.seed);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(opt.trials); ++ti) {
    const auto trial = static_cast<std::size_t>(ti);
    CounterRng rng = root.split(trial);
    const std::size_t d = opt.vary_shape ? 4 + rng.below(opt.d - 3) : opt.d;
    const std::size_t m = opt.vary_shape ? 1 + rng.below(opt.m) : opt.m;
    const bool affine = rng.bernoulli(0.05);

    Tensor v = Tensor::matrix(d, m);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> col(d);
      if (affine) {
        const double a = rng.normal(), b = rng.normal();
        for (std::size_t i = 0; i < d; ++i) col[i] = a + b * static_cast<double>(i);
      } else {
        for (double& x : col) x = rng.normal();
      }
      double n1 = 0.0;
      for (double x : col) n1 += std::abs(x);
      const double radius = rng.bernoulli(0.25) ? 1.0 : rng.uniform();
      for (std::size_t i = 0; i < d; ++i) v(i, j) = n1 > 0 ? col[i] / n1 * radius : 0.0;
    }

    TrialResult& res = results[trial];
    const Tensor d2 = diff_columns(v, 2);
    const double d2_norm = entrywise_l1(d2);
    for (std::size_t q = 2; q < d; ++q) {
      const Tensor dq = diff_columns(v, q);
      const double lhs = entrywise_l1(kernels::serial::gram(dq));
      const double dq_norm = entrywise_l1(dq);
      const double bound = std::pow(pow2(static_cast<int>(q) - 2) * d2_norm, 2);
      const double inter = dq_norm * dq_norm;
      ++res.checks;
      res.bound_margin = std::min(res.bound_margin, bound - lhs);
      res.inter_margin = std::min(res.inter_margin, inter - lhs);
      if (lhs > bound + opt.slack) {
        ++res.bound_violations;
        if (res.first_violation.empty())
          res.first_violation = "trial " + std::to_string(trial) + " q=" + std::to_string(q) + ": " +
                                format_double(lhs) + " > " + format_double(bound);
      }
      if (lhs > inter + opt.slack) ++res.inter_violations;
      for (std::size_t j = 0; j < m; ++j) {
        double col_q = 0.0, col_2 = 0.0;
        for (std::size_t i = 0; i < dq.rows(); ++i) col_q += std::abs(dq(i, j));
        for (std::size_t i = 0; i < d2.rows(); ++i) col_2 += std::abs(d2(i, j));
        const double allowed = pow2(static_cast<int>(q) - 2) * col_2;
        ++res.chain_checks;
        res.chain_margin = std::min(res.chain_margin, allowed - col_q);
        if (col_q > allowed + opt.slack) ++res.chain_violations;
      }
    }
  }

  VerificationReport bound, inter, chain;
  bound.claim = "similarity_bound: |D^q S|_1 <= (2^(q-2) |D^2 V|_1)^2";
  inter.claim = "similarity_bound.intermediate: |D^q S|_1 <= (sum_i |D^q v_i|_1)^2";
  chain.claim = "similarity_bound.chain: |D^q v|_1 <= 2^(q-2) |D^2 v|_1";
  for (auto* r : {&bound, &inter, &chain}) r->worst_margin = std::numeric_limits<double>::infinity();
  for (const TrialResult& r : results) {
    bound.instances += r.checks;
    inter.instances += r.checks;
    chain.instances += r.chain_checks;
    bound.violations += r.bound_violations;
    inter.violations += r.inter_violations;
    chain.violations += r.chain_violations;
    bound.worst_margin = std::min(bound.worst_margin, r.bound_margin);
    inter.worst_margin = std::min(inter.worst_margin, r.inter_margin);
    chain.worst_margin = std::min(chain.worst_margin, r.chain_margin);
    if (!r.first_violation.empty() && bound.notes.empty()) bound.notes.push_back(r.first_violation);
  }
  const std::string setup = std::to_string(opt.trials) + " trials, " +
                            (opt.vary_shape ? "D in [4, " + std::to_string(opt.d) + "], M in [1, " + std::to_string(opt.m) + "]"
                                            : "D=" + std::to_string(opt.d) + ", M=" + std::to_string(opt.m)) +
                            ", seed=" + std::to_string(opt.seed) + ", slack=" + format_double(opt.slack);
  for (auto* r : {&bound, &inter, &chain}) {
    r->notes.push_back(setup);
    r->finalize();
  }
  return {bound, inter, chain};
}

VerificationReport verify_lemma1(std::size_t trials, std::size_t max_d, std::uint64_t seed) {
  VerificationReport report;
  report.claim = "norm_bound: |D^q v|_1 <= |A_q|_(1->1) |v|_1 <= 2^q |v|_1";
  report.worst_margin = std::numeric_limits<double>::infinity();
  if (max_d < 2) throw DimensionUnderflowError("verify_lemma1 needs D >= 2");

  // Induced norms: never above 2^q, and exactly 2^q once some column meets all q+1 coefficients.
  std::size_t narrow = 0;
  for (std::size_t d = 2; d <= max_d; ++d) {
    for (std::size_t q = 1; q < d; ++q) {
      const double norm = induced_one_norm(build_operator_matrix(q, d).matrix);
      const double cap = pow2(static_cast<int>(q));
      ++report.instances;
      report.worst_margin = std::min(report.worst_margin, cap - norm);
      if (norm > cap) {
        ++report.violations;
        report.notes.push_back("induced norm above 2^q at D=" + std::to_string(d) + ", q=" + std::to_string(q));
      }
      const bool full_column = d >= 2 * q + 1;
      if (full_column && norm != cap) {
        ++report.violations;
        report.notes.push_back("induced norm != 2^q at D=" + std::to_string(d) + ", q=" + std::to_string(q));
      }
      if (!full_column && norm != cap) ++narrow;
    }
  }
  report.notes.push_back(std::to_string(narrow) +
                         " (D, q) pairs with D < 2q+1 have induced norm below 2^q: no column holds every binomial");

  CounterRng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 2 + rng.below(max_d - 1);
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    double n1 = 0.0;
    for (double x : v) n1 += std::abs(x);
    for (std::size_t q = 1; q < d; ++q) {
      const std::vector<double> w = diff(v, q);
      double wn = 0.0;
      for (double x : w) wn += std::abs(x);
      const double allowed = pow2(static_cast<int>(q)) * n1;
      ++report.instances;
      report.worst_margin = std::min(report.worst_margin, allowed - wn);
      if (wn > allowed * (1.0 + 1e-12)) ++report.violations;
    }
  }
  report.notes.push_back(std::to_string(trials) + " random vectors, D in [2, " + std::to_string(max_d) +
                         "], seed=" + std::to_string(seed));
  report.finalize();
  return report;
}

namespace {

// Cosine evaluated in extended precision and rounded once.
double cosine_extended(const long double* u, const long double* v, std::size_t n) {
  long double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return static_cast<double>(dot / std::sqrt(nu * nv));
}

std::vector<double> unit_l2(const long double* v, std::size_t n) {
  long double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  s = std::sqrt(s);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(v[i] / s);
  return out;
}

double dot3(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

CounterexampleReport counterexample_demo() {
  CounterexampleReport r;
  const long double sqrt3 = std::sqrt(3.0L);
  const long double anchor[3] = {1, 1, 1};
  const long double plus[3] = {2 + sqrt3, 1, 0};
  const long double minus[3] = {2 - sqrt3, 1, 0};
  r.cos_plus = cosine_extended(anchor, plus, 3);
  r.cos_minus = cosine_extended(anchor, minus, 3);
  r.lines.push_back("cos_l2([1, 1, 1], [2+sqrt(3), 1, 0]) = " + format_double(r.cos_plus));
  r.lines.push_back("cos_l2([1, 1, 1], [2-sqrt(3), 1, 0]) = " + format_double(r.cos_minus));
  r.lines.push_back("identical similarity, different feature vectors: a q=0 constraint alone cannot tell them apart");

  // Linearised q=0 system on L2-unit directions: one equation, both candidates satisfy it.
  const std::vector<double> a_unit = unit_l2(anchor, 3);
  r.candidate_plus = unit_l2(plus, 3);
  r.candidate_minus = unit_l2(minus, 3);
  r.q0_target = r.cos_plus;
  r.q0_residual_plus = std::abs(dot3(a_unit, r.candidate_plus) - r.q0_target);
  r.q0_residual_minus = std::abs(dot3(a_unit, r.candidate_minus) - r.q0_target);
  r.lines.push_back("linearized constraint system, q=0 only (1 equation, D=3), target " + format_double(r.q0_target) +
                    ": residual " + format_double(r.q0_residual_plus) + " for the + candidate, " +
                    format_double(r.q0_residual_minus) + " for the - candidate; both admitted");

  // Constant anchor: every derivative row vanishes.
  const std::vector<double> constant = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const Tensor m_const = linearized_constraint_matrix(constant, all_orders(3));
  r.constant_anchor_rank = numerical_rank(m_const, 1e-10);
  r.constant_anchor_disambiguated = r.constant_anchor_rank == 3;
  r.lines.push_back("linearized constraint system, constant anchor [1/3, 1/3, 1/3], q=0..2: rank " +
                    std::to_string(r.constant_anchor_rank) + " of 3 -> " +
                    (r.constant_anchor_disambiguated ? "disambiguated" : "not disambiguated") +
                    " (D^1 and D^2 of a constant vector are zero, so the derivative rows carry no information)");

  // Generic anchor: two simplex points with equal q=0 value differ at q=1.
  r.generic_anchor = {0.5, 0.3, 0.2};
  r.generic_first = {0.2, 0.5, 0.3};
  // Move along w, orthogonal to the anchor and to [1, 1, 1], so q=0 value and L1 mass are preserved.
  const double* a = r.generic_anchor.data();
  const double w[3] = {a[1] - a[2], a[2] - a[0], a[0] - a[1]};
  double step = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    if (w[i] < 0) step = std::min(step, -r.generic_first[i] / w[i]);
  step *= 0.5;  // stay strictly inside the simplex
  r.generic_second.resize(3);
  for (int i = 0; i < 3; ++i) r.generic_second[i] = r.generic_first[i] + step * w[i];
  const Tensor m_gen = linearized_constraint_matrix(r.generic_anchor, all_orders(3));
  r.generic_rank = numerical_rank(m_gen, 1e-10);
  auto row_dot = [&](std::size_t row, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += m_gen(row, j) * x[j];
    return s;
  };
  r.generic_q0_first = row_dot(0, r.generic_first);
  r.generic_q0_second = row_dot(0, r.generic_second);
  r.generic_q1_first = row_dot(1, r.generic_first);
  r.generic_q1_second = row_dot(1, r.generic_second);
  r.generic_disambiguated = std::abs(r.generic_q0_first - r.generic_q0_second) < 1e-12 &&
                            std::abs(r.generic_q1_first - r.generic_q1_second) > 1e-9;
  r.lines.push_back("generic anchor " + format_vector(r.generic_anchor) + ": candidates " +
                    format_vector(r.generic_first) + " and " + format_vector(r.generic_second));
  r.lines.push_back("  q=0 values " + format_double(r.generic_q0_first) + " / " + format_double(r.generic_q0_second) +
                    ", q=1 values " + format_double(r.generic_q1_first) + " / " + format_double(r.generic_q1_second));
  r.lines.push_back(std::string("  stacked system rank ") + std::to_string(r.generic_rank) + " of 3 -> " +
                    (r.generic_disambiguated ? "disambiguated" : "not disambiguated"));
  r.lines.push_back("note: the anchor [1, 1, 1] has D^1 = 0, so derivative similarities cannot separate this "
                    "particular pair; the cosine is undefined for the zero vector under the L2 convention");
  return r;
}

}  // namespace derprop
