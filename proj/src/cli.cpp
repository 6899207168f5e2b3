#include "derprop/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <json.hpp>
#include <optional>

#include "derprop/format.hpp"
#include "derprop/gradcheck.hpp"
#include "derprop/io.hpp"
#include "derprop/similarity.hpp"
#include "derprop/theory.hpp"
#include "derprop/trainer.hpp"

namespace derprop {

namespace {

int print_reports(const std::vector<VerificationReport>& reports, std::ostream& out) {
  bool pass = true;
  nlohmann::json j;
  j["reports"] = nlohmann::json::array();
  for (const VerificationReport& r : reports) {
    out << io::report_to_text(r);
    j["reports"].push_back(io::report_to_json(r));
    pass = pass && r.pass;
  }
  j["pass"] = pass;
  out << "--- json ---\n" << j.dump(2) << "\n";
  return pass ? kExitOk : kExitVerificationFailed;
}

TrainConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

struct RectifyArgs {
  std::string logits, features, out, prev;
  std::vector<int> blend;
};

int run_rectify(const RectifyArgs& a, std::ostream& out) {
  const LogitMap logits{io::read_tensor(a.logits)};
  const FeatureMap features{io::read_tensor(a.features)};
  require_matrix(logits.values, "rectify --logits");
  require_matrix(features.values, "rectify --features");
  const LogitMap rectified = derivative_propagate(logits, features);
  if (a.blend.empty()) {
    io::write_tensor(a.out, rectified.values);
    out << "rectified logits " << shape_string(rectified.values.dims()) << " -> " << a.out << "\n";
    return kExitOk;
  }
  const ProbMap weak = a.prev.empty() ? softmax_columns(logits) : ProbMap{io::read_tensor(a.prev)};
  if (!weak.values.same_shape(logits.values)) throw ShapeError("rectify --prev: shape differs from --logits");
  const ProbMap blended = blend_pseudo_labels(weak, softmax_columns(rectified), BlendSchedule{a.blend[0], a.blend[1]});
  io::write_tensor(a.out, blended.values);
  out << "blended pseudo-labels " << shape_string(blended.values.dims()) << " (eta "
      << format_double(BlendSchedule{a.blend[0], a.blend[1]}.eta()) << ") -> " << a.out << "\n";
  return kExitOk;
}

struct VerifyArgs {
  bool all = false, lemma1 = false, thm1 = false, thm2 = false;
  std::size_t dim = 8, trials = 1000;
  std::uint64_t seed = 0;
  double tol = 1e-10;
};

int run_verify(VerifyArgs a, std::ostream& out) {
  if (!a.lemma1 && !a.thm1 && !a.thm2) a.all = true;
  if (a.dim < 2) throw ConfigError("--dim must be >= 2");
  std::vector<VerificationReport> reports;
  if (a.all || a.lemma1) reports.push_back(verify_lemma1(a.trials, a.dim, a.seed));
  if (a.all || a.thm1) {
    for (std::size_t d = 2; d <= a.dim; ++d) reports.push_back(verify_well_posedness(d, a.tol));
    reports.push_back(verify_recovery(a.trials, a.dim, a.seed));
  }
  if (a.all || a.thm2) {
    if (a.dim < 3) throw ConfigError("--thm2 needs --dim >= 3");
    BoundednessOptions opt;
    opt.trials = a.trials;
    opt.d = a.dim;
    opt.seed = a.seed;
    opt.vary_shape = true;
    for (VerificationReport& r : verify_boundedness(opt)) reports.push_back(std::move(r));
  }
  return print_reports(reports, out);
}

int run_train(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const TrainConfig cfg = load_config(config_path);
  const TrainResult result = train(cfg, make_dataset(cfg), std::filesystem::path(out_dir));
  const EpochMetrics& last = result.metrics.back();
  out << "trained " << cfg.epochs << " epochs; final miou_train " << format_fixed(last.miou_train, 4) << " miou_val "
      << format_fixed(last.miou_val, 4) << "\n";
  out << "artifacts in " << out_dir << "\n";
  return kExitOk;
}

int run_compare_ops(const std::string& config_path, std::ostream& out) {
  const TrainConfig base = load_config(config_path);
  const Dataset data = make_dataset(base);
  out << "variant         miou_val  miou_train\n";
  for (DerivativeVariant v : kAllVariants) {
    TrainConfig cfg = base;
    cfg.der.variant = v;
    std::string name(variant_name(v));
    name.resize(16, ' ');
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      out << name << "n/a       (" << e.what() << ")\n";
      continue;
    }
    const TrainResult r = train(cfg, data);
    out << name << format_fixed(r.metrics.back().miou_val, 4) << "    " << format_fixed(r.metrics.back().miou_train, 4)
        << "\n";
  }
  return kExitOk;
}

void print_joint_recovery(std::ostream& out) {
  out << "two unknown vectors on the 3-simplex, constrained by u.u, v.v and u.v at each order\n";
  out << "solution clusters up to swapping u and v (brute force, grid step 0.005)\n";
  out << "trial  u                         v                         q=0 only  q=0..2  reversed pair solves\n";
  std::size_t index = 0;
  for (const JointRecoveryTrial& t : run_joint_recovery_experiment(5, 0)) {
    auto fmt = [](const std::vector<double>& x) {
      return "[" + format_fixed(x[0], 3) + ", " + format_fixed(x[1], 3) + ", " + format_fixed(x[2], 3) + "]";
    };
    std::string u = fmt(t.u), v = fmt(t.v);
    u.resize(26, ' ');
    v.resize(26, ' ');
    std::string q0 = std::to_string(t.zero_order.clusters), full = std::to_string(t.full_stack.clusters);
    q0.resize(10, ' ');
    full.resize(8, ' ');
    out << index++ << "      " << u << v << q0 << full << (t.reversal_is_solution ? "yes" : "no") << "\n";
  }
  out << "reversing the channel order keeps every constraint, so without an anchor the stack\n"
         "leaves the pair (u, v) and its reversal indistinguishable\n";
}

int run_demo(const std::string& which, std::ostream& out) {
  if (which == "counterexample") {
    for (const std::string& line : counterexample_demo().lines) out << line << "\n";
    return kExitOk;
  }
  if (which == "joint-recovery") {
    print_joint_recovery(out);
    return kExitOk;
  }
  throw ConfigError("unknown demo '" + which + "' (available: counterexample, joint-recovery)");
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Derivative label propagation toolkit", args.empty() ? "derprop" : args.front()};
  app.require_subcommand(1);

  RectifyArgs rect;
  auto* rectify = app.add_subcommand("rectify", "Rectify logits with the feature and derivative similarities");
  rectify->add_option("--logits", rect.logits, "Logits [C, M] (.dpt)")->required();
  rectify->add_option("--features", rect.features, "Features [D, M] (.dpt), used as given")->required();
  rectify->add_option("--out", rect.out, "Output .dpt")->required();
  rectify->add_option("--blend", rect.blend, "EP_CUR EP_TOTAL: write blended pseudo-labels instead")->expected(2);
  rectify->add_option("--prev", rect.prev, "Weak-branch probabilities [C, M] for --blend (default softmax(logits))");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Numerically verify the derivative-operator theory");
  verify->add_flag("--all", ver.all, "Run every check (default)");
  verify->add_flag("--lemma1", ver.lemma1, "Operator norm bounds");
  verify->add_flag("--thm1", ver.thm1, "Rank / well-posedness and recovery");
  verify->add_flag("--thm2", ver.thm2, "Derivative similarity boundedness");
  verify->add_option("--dim", ver.dim, "Feature dimension D")->capture_default_str();
  verify->add_option("--trials", ver.trials, "Random instances per check")->capture_default_str();
  verify->add_option("--seed", ver.seed, "Seed")->capture_default_str();
  verify->add_option("--tol", ver.tol, "Relative rank tolerance")->capture_default_str();

  GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--trials", gc.trials, "Instances per loss family")->capture_default_str();
  gradcheck->add_option("--seed", gc.seed, "Seed")->capture_default_str();

  std::string config_path, out_dir;
  auto* train_cmd = app.add_subcommand("train", "Train the toy model on synthetic scenes");
  train_cmd->add_option("--config", config_path, "Config JSON")->required();
  train_cmd->add_option("--out", out_dir, "Run directory")->required();

  auto* compare = app.add_subcommand("compare-ops", "Train once per derivative variant and tabulate mIoU");
  compare->add_option("--config", config_path, "Config JSON")->required();

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Worked examples");
  demo->add_option("name", demo_name, "counterexample | joint-recovery")->required();

  try {
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("derprop");
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (rectify->parsed()) return run_rectify(rect, out);
    if (verify->parsed()) return run_verify(ver, out);
    if (gradcheck->parsed()) return print_reports(gradient_check_suite(gc), out);
    if (train_cmd->parsed()) return run_train(config_path, out_dir, out);
    if (compare->parsed()) return run_compare_ops(config_path, out);
    if (demo->parsed()) return run_demo(demo_name, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerificationFailed;
  }
  return kExitUsage;
}

}  // namespace derprop
