// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "derprop/cli.hpp"
#include "derprop/format.hpp"
#include "derprop/gradcheck.hpp"
#include "derprop/io.hpp"
#include "derprop/losses.hpp"
#include "derprop/similarity.hpp"
#include "derprop/theory.hpp"
#include "derprop/trainer.hpp"
#include "helpers.hpp"
#include "io_fixtures.hpp"

namespace derprop {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome induced_norm_exactness() {
  std::size_t checked = 0, bad = 0;
  std::string first;
  for (std::size_t q = 1; q <= 6; ++q)
    for (std::size_t d = q + 1; d <= 12; ++d) {
      ++checked;
      const double norm = induced_one_norm(build_operator_matrix(q, d).matrix);
      if (norm != std::ldexp(1.0, static_cast<int>(q))) {
        if (bad++ == 0) first = "q=" + std::to_string(q) + " D=" + std::to_string(d) + " gives " + format_double(norm);
      }
    }
  std::string detail = std::to_string(checked - bad) + "/" + std::to_string(checked) + " (q, D) pairs give 2^q";
  if (bad) detail += "; first mismatch " + first + " (norm is 2^q only once D >= 2q+1)";
  return {bad == 0, detail};
}

Outcome rank_facts() {
  std::size_t bad = 0;
  for (std::size_t d = 2; d <= 16; ++d) {
    for (std::size_t q = 0; q < d; ++q) {
      const Tensor a = q == 0 ? Tensor::identity(d) : build_operator_matrix(q, d).matrix;
      if (numerical_rank(a, 1e-10) != d - q) ++bad;
    }
    if (numerical_rank(joint_coefficient_matrix(d).matrix, 1e-10) != d) ++bad;
  }
  return {bad == 0, "D = 2..16, " + std::to_string(bad) + " rank mismatches"};
}

Outcome boundedness() {
  BoundednessOptions opt;
  opt.trials = 10000;
  opt.d = 8;
  opt.m = 16;
  opt.seed = 2024;
  opt.vary_shape = true;
  std::size_t violations = 0, instances = 0;
  double worst = INFINITY;
  for (const VerificationReport& r : verify_boundedness(opt)) {
    violations += r.violations;
    instances += r.instances;
    worst = std::min(worst, r.worst_margin);
  }
  return {violations == 0, std::to_string(instances) + " checks, " + std::to_string(violations) +
                               " violations, smallest bound minus lhs " + format_double(worst) +
                               " (allowance 1e-9)"};
}

Outcome counterexample() {
  const CounterexampleReport r = counterexample_demo();
  const double half = std::sqrt(2.0) / 2;
  const bool cos_ok = std::abs(r.cos_plus - half) <= 1e-12 && std::abs(r.cos_minus - half) <= 1e-12;
  const bool both = std::abs(r.q0_residual_plus) <= 1e-12 && std::abs(r.q0_residual_minus) <= 1e-12;
  const bool deficient = r.constant_anchor_rank < 3 && !r.constant_anchor_disambiguated;
  return {cos_ok && both && deficient, "cos+ " + format_double(r.cos_plus) + ", cos- " + format_double(r.cos_minus) +
                                           ", constant-anchor rank " + std::to_string(r.constant_anchor_rank)};
}

Outcome gradients() {
  GradcheckOptions opt;
  opt.trials = 100;
  bool pass = true;
  double worst = 0.0;
  std::string failed;
  const auto reports = gradient_check_suite(opt);
  for (const VerificationReport& r : reports) {
    pass = pass && r.pass;
    if (!r.pass) failed += " " + r.claim;
    worst = std::max(worst, 1e-4 - r.worst_margin);
  }
  return {pass, std::to_string(reports.size()) + " families, max relative error " + format_double(worst) +
                    (failed.empty() ? "" : "; failed:" + failed)};
}

Outcome dlp_identities() {
  const LogitMap logits{testing::random_matrix(5, 1, 1)};
  const FeatureMap f{Tensor::from_rows({{0.5}, {0.5}, {0.5}, {0.5}})};
  bool ok = derivative_propagate(logits, f).values.bit_equal(logits.values);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t c = 2 + seed % 5, m = 1 + seed % 9;
    const ProbMap w = softmax_columns(LogitMap{testing::random_matrix(c, m, seed, 3.0)});
    const ProbMap t = softmax_columns(LogitMap{testing::random_matrix(c, m, seed + 500, 3.0)});
    const int total = 1 + static_cast<int>(seed % 40);
    ok = ok && blend_pseudo_labels(w, t, {0, total}).values.bit_equal(w.values);
    ok = ok && blend_pseudo_labels(w, t, {total, total}).values.bit_equal(t.values);
    const ProbMap mid = blend_pseudo_labels(w, t, {static_cast<int>(seed) % (total + 1), total});
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < c; ++i) s += mid.values(i, j);
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {ok && worst <= 1e-6, "identity and endpoints bitwise " + std::string(ok ? "yes" : "no") +
                                   ", worst column-sum error " + format_double(worst)};
}

// Q = 1 derivative loss written out by hand: |S - Sgt| + |D1 S - D1 Sgt| + eta |D2 V|.
double hand_coded_q1_loss(const Tensor& v, const Tensor& gt0, const Tensor& gt1, double eta) {
  const std::size_t d = v.rows(), m = v.cols();
  Tensor d1 = Tensor::matrix(d - 1, m), d2 = Tensor::matrix(d - 2, m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i + 1 < d; ++i) d1(i, j) = v(i + 1, j) - v(i, j);
    for (std::size_t i = 0; i + 2 < d; ++i) d2(i, j) = d1(i + 1, j) - d1(i, j);
  }
  auto gram_l1 = [m](const Tensor& x, const Tensor& target) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.rows(); ++k) s += x(k, i) * x(k, j);
        row += std::abs(s - target(i, j));
      }
      total += row;
    }
    return total;
  };
  double sparsity = 0.0;
  for (std::size_t i = 0; i < d2.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += std::abs(d2(i, j));
    sparsity += row;
  }
  return gram_l1(v, gt0) + gram_l1(d1, gt1) + eta * sparsity;
}

Outcome q1_consistency() {
  std::size_t equal = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t d = 3 + seed % 6, m = 2 + seed % 11;
    const FeatureMap f = normalize_features(testing::random_matrix(d, m, seed), ZeroColumnPolicy::kError);
    const FeatureMap g = normalize_features(testing::random_matrix(d, m, seed + 99), ZeroColumnPolicy::kError);
    const auto gt = similarity_stack(g, 1, DerivativeVariant::kForward);
    const DerLossSpec spec;
    const double lib = derivative_loss(similarity_stack(f, 1, DerivativeVariant::kForward), gt, f, spec);
    if (lib == hand_coded_q1_loss(f.values, gt[0], gt[1], spec.eta)) ++equal;
  }
  return {equal == 20, std::to_string(equal) + "/20 instances bitwise equal"};
}

Outcome uniqueness() {
  std::size_t ok = 0;
  double worst_residual = 0.0;
  const auto trials = run_uniqueness_trials(20, 11);
  for (const UniquenessTrial& t : trials) {
    const bool full_rank = t.solve.rank == 3;
    if (full_rank) worst_residual = std::max(worst_residual, t.solve.residual);
    if (t.zero_order.clusters >= 2 && t.full_stack.clusters == 1 && full_rank && t.solve.residual < 1e-8) ++ok;
  }
  return {ok == 20 && trials.size() == 20,
          std::to_string(ok) + "/20 anchors separate, worst residual " + format_double(worst_residual)};
}

Outcome ablation_direction() {
  struct Variant {
    const char* name;
    bool dlp, der, sparsity;
  };
  const Variant variants[] = {{"full", true, true, true},
                              {"w/o DLP", false, false, true},
                              {"w/o Der", true, false, true},
                              {"sparsity off", true, true, false}};
  double mean[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig base;
    base.seed = seed;
    base.height = base.width = 32;
    base.train_scenes = 8;
    base.labeled_fraction = 0.125;
    base.epochs = 30;
    base.export_maps = 0;
    const Dataset data = make_dataset(base);
    for (int k = 0; k < 4; ++k) {
      TrainConfig c = base;
      c.dlp_enabled = variants[k].dlp;
      c.der_loss_enabled = variants[k].der;
      c.der.sparsity_enabled = variants[k].sparsity;
      mean[k] += train(c, data).metrics.back().miou_val / 5.0;
    }
  }
  std::ostringstream detail;
  for (int k = 0; k < 4; ++k) detail << (k ? ", " : "") << variants[k].name << " " << format_fixed(mean[k], 4);
  const bool a = mean[0] >= mean[1], b = mean[0] >= mean[2], c = mean[0] >= mean[3];
  detail << "; full>=w/o DLP " << (a ? "yes" : "no") << ", full>=w/o Der " << (b ? "yes" : "no")
         << ", sparsity on>=off " << (c ? "yes" : "no");
  return {a && b && c, detail.str()};
}

Outcome momentum_contraction() {
  // Dyadic values keep every average exact, so halving can be checked with ==.
  const std::vector<double> c{0.75, -3.5, 0.125, 12.0};
  MomentumState s{{0.0, 5.0, -7.25, 12.5}, 0};
  bool ok = true;
  for (int ep = 0; ep < 10; ++ep) {
    const MomentumState next = momentum_update(s, c);
    for (std::size_t i = 0; i < c.size(); ++i) ok = ok && (next.theta_m[i] - c[i]) * 2.0 == s.theta_m[i] - c[i];
    ok = ok && next.epoch == ep + 1;
    s = next;
  }
  TrainConfig cfg;
  cfg.height = cfg.width = 8;
  cfg.train_scenes = 4;
  cfg.val_scenes = 1;
  cfg.epochs = 2;
  cfg.momentum_enabled = false;
  const bool untouched = !train(cfg, make_dataset(cfg)).momentum.has_value();
  return {ok && untouched, std::string("halving exact over 10 epochs: ") + (ok ? "yes" : "no") +
                               ", disabled run has no momentum state: " + (untouched ? "yes" : "no")};
}

std::string cli_output(const std::vector<std::string>& args, int& code) {
  std::ostringstream out, err;
  code = cli_dispatch(args, out, err);
  return out.str() + err.str();
}

Outcome determinism() {
  const testing::TempDir dir("accept_det");
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.height = cfg.width = 16;
  cfg.train_scenes = 8;
  cfg.epochs = 3;
  io::write_file_atomic(dir / "c.json", config_to_json(cfg).dump(2));
  bool same = true;
  int code = 0;
  std::string outputs[2];
  for (int k = 0; k < 2; ++k) {
    const std::string run = (dir / ("run" + std::to_string(k))).string();
    outputs[k] = cli_output({"derprop", "train", "--config", (dir / "c.json").string(), "--out", run}, code);
    same = same && code == kExitOk;
  }
  for (const char* f : {"metrics.csv", "final_model.dpt", "momentum_model.dpt", "config.json"})
    same = same && io::read_file(dir / ("run0/" + std::string(f))) == io::read_file(dir / ("run1/" + std::string(f)));
  int c1 = 0, c2 = 0;
  const std::string v1 = cli_output({"derprop", "verify", "--all", "--seed", "3"}, c1);
  const std::string v2 = cli_output({"derprop", "verify", "--all", "--seed", "3"}, c2);
  const bool verify_same = v1 == v2 && c1 == kExitOk && c2 == kExitOk;
  return {same && verify_same, std::string("train artifacts identical: ") + (same ? "yes" : "no") +
                                   ", verify --all output identical: " + (verify_same ? "yes" : "no")};
}

Outcome io_contract() {
  std::size_t round_trips = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(seed);
    std::vector<std::size_t> dims(1 + rng.below(4));
    for (auto& d : dims) d = 1 + rng.below(6);
    const Tensor t = testing::random_tensor(dims, seed + 1, 1e3);
    const auto enc = io::encode_tensor(t);
    if (io::decode_tensor(std::string(enc.begin(), enc.end())).bit_equal(t)) ++round_trips;
  }
  std::size_t designated = 0;
  const auto fixtures = testing::corrupt_dpt_fixtures();
  for (const auto& f : fixtures) {
    try {
      io::decode_tensor(f.bytes);
    } catch (const FormatError& e) {
      if (e.kind() == f.expected) ++designated;
    }
  }
  return {round_trips == 100 && designated == fixtures.size(),
          std::to_string(round_trips) + "/100 round trips, " + std::to_string(designated) + "/" +
              std::to_string(fixtures.size()) + " corrupt fixtures raise their error"};
}

}  // namespace
}  // namespace derprop

int main() {
  using namespace derprop;
#if defined(__GLIBC__)
  // Same heap settings as the CLI: keep M x M temporaries out of mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"induced norm of A_q is 2^q", induced_norm_exactness},
      {"rank facts", rank_facts},
      {"high-order similarity bound", boundedness},
      {"intro counterexample", counterexample},
      {"gradient correctness", gradients},
      {"propagation identities", dlp_identities},
      {"Q=1 loss consistency", q1_consistency},
      {"uniqueness oracle", uniqueness},
      {"ablation direction", ablation_direction},
      {"momentum contraction", momentum_contraction},
      {"determinism", determinism},
      {"I/O contract", io_contract},
  };
  int failed = 0, index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << index << "] " << c.name << ": " << o.detail << " ("
              << format_fixed(secs, 1) << " s)" << std::endl;
  }
  std::cout << (12 - failed) << "/12 criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
