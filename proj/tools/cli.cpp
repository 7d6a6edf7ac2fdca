#include "cli.hpp"

#include "switchq/bounds.hpp"
#include "switchq/harness.hpp"
#include "switchq/io.hpp"
#include "switchq/mdp.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace switchq {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  if (std::isfinite(x) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

// Writes to the file at `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

struct Options {
  std::uint64_t seed = 0;
  int n_states = 3;
  int n_actions = 2;
  double gamma = 0.9;
  double alpha = 0.01;
  long horizon = 10'000;
  long trials = 1000;
  double tol = 1e-12;
  double epsilon = 0.1;
  std::string out;
  std::string mdp_path;
  double bound_scale = 1.0;
  std::optional<double> pairs;
  std::optional<double> d_min;
  std::optional<double> d_max;
};

RandomInstance instance_from(const Options& o) {
  if (!o.mdp_path.empty()) return load_mdp(o.mdp_path);
  return random_mdp(o.seed, o.n_states, o.n_actions, o.gamma);
}

ExperimentConfig experiment_config(const Options& o) {
  ExperimentConfig c;
  c.alpha = o.alpha;
  c.horizon = o.horizon;
  c.n_trials = o.trials;
  c.base_seed = o.seed;
  c.bound_scale = o.bound_scale;
  return c;
}

// n, d_min, d_max and gamma from an MDP file when given, else from flags.
BoundInputs analytic_inputs(const Options& o, bool need_alpha) {
  BoundInputs in;
  in.alpha = need_alpha ? o.alpha : 0.5;
  if (!o.mdp_path.empty()) {
    RandomInstance inst = load_mdp(o.mdp_path);
    const OccupationMeasure occ = occupation_measure(inst.sampling);
    in.n = inst.mdp.n_pairs();
    in.d_min = occ.d_min;
    in.d_max = occ.d_max;
    in.gamma = inst.mdp.gamma();
    // Q_0 = 0, so the initial error is ||Q*||.
    const QVector q_star = optimal_q(inst.mdp, o.tol);
    in.q0_err_l2 = q_star.norm();
    in.q0_err_inf = q_star.lpNorm<Eigen::Infinity>();
    return in;
  }
  if (!o.pairs || !o.d_min) {
    throw CLI::ValidationError("--pairs/--d-min", "required when no MDP file is given");
  }
  in.n = *o.pairs;
  in.d_min = *o.d_min;
  in.d_max = o.d_max.value_or(*o.d_min);
  in.gamma = o.gamma;
  return in;
}

int cmd_generate(const Options& o, std::ostream& out) {
  const RandomInstance inst = random_mdp(o.seed, o.n_states, o.n_actions, o.gamma);
  emit(o.out, mdp_to_json(inst.mdp, inst.sampling), out);
  return kExitPass;
}

int cmd_solve(const Options& o, std::ostream& out) {
  const RandomInstance inst = load_mdp(o.mdp_path);
  const QVector q = optimal_q(inst.mdp, o.tol);
  const int ns = inst.mdp.n_states();
  std::ostringstream os;
  os << "s,a,q_star\n";
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < inst.mdp.n_actions(); ++a) {
      os << s << ',' << a << ',' << format_double(q(pair_index(ns, s, a))) << '\n';
    }
  }
  const DeterministicPolicy pi = greedy_policy(q, ns);
  os << "# greedy policy:";
  for (int a : pi.actions) os << ' ' << a;
  os << "\n# bellman residual ||TQ - Q||_inf = " << format_double(bellman_residual(inst.mdp, q))
     << '\n';
  emit(o.out, os.str(), out);
  return kExitPass;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const RandomInstance inst = load_mdp(o.mdp_path);
  const Problem problem = make_problem(inst.mdp, inst.sampling, o.tol);
  ExperimentConfig config = experiment_config(o);
  config.record_trajectories = true;
  try {
    const TrialEstimates run = run_trials(problem, config);
    std::ostringstream os;
    write_trajectory_csv(os, run.rows);
    emit(o.out, os.str(), out);
  } catch (const SandwichViolation& v) {
    err << "sandwich violation: " << v.what() << '\n';
    return kExitFailure;
  }
  return kExitPass;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  const RandomInstance inst = instance_from(o);
  const Problem problem = make_problem(inst.mdp, inst.sampling, o.tol);
  const VerificationReport report = verify_experiment(problem, experiment_config(o));
  emit(o.out, report_to_json(report), out);
  err << "verify: " << (report.pass() ? "PASS" : "FAIL") << " in " << report.wall_seconds
      << " s\n";
  return report.pass() ? kExitPass : kExitFailure;
}

int cmd_bounds(const Options& o, std::ostream& out) {
  const BoundInputs in = analytic_inputs(o, true);
  const std::vector<long> checkpoints = geometric_checkpoints(o.horizon);
  std::ostringstream os;
  write_bound_curves_csv(os, checkpoints, in, o.epsilon);
  emit(o.out, os.str(), out);
  return kExitPass;
}

int cmd_complexity(const Options& o, std::ostream& out) {
  const BoundInputs in = analytic_inputs(o, false);
  const SampleComplexity sc = sample_complexity(o.epsilon, in.n, in.d_min, in.d_max, in.gamma);
  std::ostringstream os;
  os << "# alpha = eps^2 d_min^3 (1-gamma)^5 / (729 gamma^2 d_max^2 n^2)\n"
     << "# k_transient = ln(6 n^1.5 / (eps (1-gamma))) / (alpha d_min (1-gamma))\n"
     << "# k_coupling = 2 ln(24 gamma d_max n^(2/3) / (eps d_min (1-gamma)^2)) / (alpha d_min (1-gamma))\n"
     << "# k_min = ceil(max(k_transient, k_coupling))\n"
     << "epsilon=" << format_double(o.epsilon) << '\n'
     << "n=" << format_double(in.n) << '\n'
     << "d_min=" << format_double(in.d_min) << '\n'
     << "d_max=" << format_double(in.d_max) << '\n'
     << "gamma=" << format_double(in.gamma) << '\n'
     << "alpha=" << format_double(sc.alpha) << '\n'
     << "k_transient=" << format_double(sc.k_transient) << '\n'
     << "k_coupling=" << format_double(sc.k_coupling) << '\n'
     << "k_min=" << sc.k_min << '\n';
  if (sc.alpha_clamped) os << "# alpha clamped below 1\n";
  if (sc.vacuous) os << "# a threshold is vacuous: its log argument is at most 1\n";
  emit(o.out, os.str(), out);
  return kExitPass;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"switchq: tabular Q-learning as a switched affine system, with finite-time "
               "error bounds checked by Monte Carlo"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Base seed")->capture_default_str(); };
  auto add_dims = [&](CLI::App* c) {
    c->add_option("-s,--states", o.n_states, "Number of states")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("-a,--actions", o.n_actions, "Number of actions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--gamma", o.gamma, "Discount factor in [0, 1)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  };
  auto add_out = [&](CLI::App* c, const char* what) {
    c->add_option("-o,--out", o.out, std::string(what) + " (default: stdout)");
  };
  auto add_run = [&](CLI::App* c) {
    c->add_option("--alpha", o.alpha, "Constant step size in (0, 1)")->capture_default_str();
    c->add_option("-k,--horizon", o.horizon, "Number of Q-learning steps K")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("-n,--trials", o.trials, "Number of Monte Carlo trials")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };
  auto add_tol = [&](CLI::App* c) {
    c->add_option("--tol", o.tol, "Bellman residual tolerance for Q*")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };
  auto add_analytic = [&](CLI::App* c) {
    c->add_option("mdp", o.mdp_path, "MDP file supplying n, d_min, d_max and gamma")
        ->check(CLI::ExistingFile);
    c->add_option("--pairs", o.pairs, "|S x A| when no MDP file is given");
    c->add_option("--d-min", o.d_min, "Smallest occupation frequency when no MDP file is given");
    c->add_option("--d-max", o.d_max, "Largest occupation frequency (default: d_min)");
    c->add_option("--gamma", o.gamma, "Discount factor when no MDP file is given")
        ->capture_default_str();
    c->add_option("--epsilon", o.epsilon, "Target accuracy epsilon")->capture_default_str();
    add_tol(c);
    add_out(c, "Output file");
  };

  auto* generate = app.add_subcommand(
      "generate",
      "Write a seeded random MDP with a strictly positive state distribution and behavior policy "
      "as JSON.");
  add_seed(generate);
  add_dims(generate);
  add_out(generate, "Output MDP file");

  auto* solve = app.add_subcommand(
      "solve",
      "Solve the optimal Bellman equation Q* = TQ* by value iteration and print Q*(s,a), the "
      "greedy policy and the residual ||TQ* - Q*||_inf.");
  solve->add_option("mdp", o.mdp_path, "MDP file")->required();
  add_tol(solve);
  add_out(solve, "Output file");

  auto* simulate = app.add_subcommand(
      "simulate",
      "Run constant step-size Q-learning together with its lower (linear) and upper (switching) "
      "comparison systems driven by the same noise, and write per-checkpoint errors as CSV.");
  simulate->add_option("mdp", o.mdp_path, "MDP file")->required();
  add_seed(simulate);
  add_run(simulate);
  add_tol(simulate);
  add_out(simulate, "Output CSV");

  auto* verify = app.add_subcommand(
      "verify",
      "Estimate E||Q_k - Q*||_inf and E||Q_k^L - Q*||_2 by Monte Carlo, compare mean + 3 SE with "
      "the finite-time bounds (theorem and corollary curves), and run the invariant suites: "
      "sandwich ordering, contraction ||A_pi||_inf <= rho, nonnegativity, boundedness, zero-mean "
      "noise, noise second moment <= 9/(1-gamma)^2, error-system identity and switching decay. "
      "Without an MDP file a random one is generated from --seed/-s/-a/--gamma.");
  verify->add_option("mdp", o.mdp_path, "MDP file")->check(CLI::ExistingFile);
  add_seed(verify);
  add_dims(verify);
  add_run(verify);
  add_tol(verify);
  add_out(verify, "Output JSON report");
  verify->add_option("--bound-scale", o.bound_scale, "Multiplies every bound (testing hook)")
      ->group("");

  auto* bounds = app.add_subcommand(
      "bounds",
      "Write the bound curves as CSV at geometric checkpoints: the lower-system bound, the "
      "finite-time expected error bound, its two corollary relaxations (rho^{k/2} forms), the "
      "abstract variant and the Markov-inequality probability 1 - bound/epsilon.");
  add_analytic(bounds);
  bounds->add_option("--alpha", o.alpha, "Step size")->capture_default_str();
  bounds->add_option("-k,--horizon", o.horizon, "Last checkpoint")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* complexity = app.add_subcommand(
      "complexity",
      "Print the sufficient step size and iteration count for E||Q_k - Q*||_inf <= epsilon "
      "(each bound term at most epsilon/3). gamma = 0 is rejected because the step size has "
      "gamma^2 in its denominator.");
  add_analytic(complexity);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (o.gamma >= 1.0) throw InputError("--gamma must lie in [0, 1)");
    if (*generate) return cmd_generate(o, out);
    if (*solve) return cmd_solve(o, out);
    if (*simulate) return cmd_simulate(o, out, err);
    if (*verify) return cmd_verify(o, out, err);
    if (*bounds) return cmd_bounds(o, out);
    if (*complexity) return cmd_complexity(o, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SandwichViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace switchq
