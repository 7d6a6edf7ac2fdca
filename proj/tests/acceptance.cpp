// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include "switchq/bounds.hpp"
#include "switchq/dynamics.hpp"
#include "switchq/harness.hpp"
#include "switchq/io.hpp"
#include "switchq/matrix_forms.hpp"
#include "switchq/mdp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace switchq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

void criterion(int id, const std::string& name, double limit_seconds,
               const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0 && secs > limit_seconds) {
    out.pass = false;
    out.detail += fmt("; runtime %.1f s exceeds %.0f s", secs, limit_seconds);
  }
  if (!out.pass) ++g_failures;
  std::printf("%s [%2d] %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

QVector random_vector(Rng& rng, int n, double lo, double hi) {
  QVector q(n);
  for (int i = 0; i < n; ++i) q(i) = rng.uniform(lo, hi);
  return q;
}

// Paths shared by criteria 2, 6 and 7.
struct SandwichRuns {
  InvariantCounters counters;
  long sandwich_failures = 0;
  std::string first_failure;
};

SandwichRuns run_sandwich_suite() {
  SandwichRuns out;
  Rng rng = Rng::stream(2, 0, StreamPurpose::kGenerator);
  for (int m = 0; m < 5; ++m) {
    const int ns = 2 + rng.below(3);  // 2..4
    const int na = 2 + rng.below(2);  // 2..3
    const auto inst = random_mdp(rng.next(), ns, na, std::vector<double>{0.5, 0.9, 0.99}[m % 3]);
    const Problem problem = make_problem(inst.mdp, inst.sampling);
    ExperimentConfig c;
    c.alpha = std::vector<double>{0.5, 0.1, 0.02, 0.9, 0.2}[m];
    c.horizon = 10'000;
    c.n_trials = 50;
    c.base_seed = 1000 + m;
    c.checkpoints = {0, 10'000};
    // Nonnegative initial iterate, as the boundedness argument requires.
    c.q0 = random_vector(rng, ns * na, 0.0, 1.0);
    try {
      const TrialEstimates est = run_trials(problem, c);
      const auto& k = est.counters;
      out.counters.steps += k.steps;
      out.counters.norm_violations += k.norm_violations;
      out.counters.identity_violations += k.identity_violations;
      out.counters.max_sandwich_gap = std::max(out.counters.max_sandwich_gap, k.max_sandwich_gap);
      out.counters.max_identity_gap = std::max(out.counters.max_identity_gap, k.max_identity_gap);
      out.counters.max_q_norm = std::max(out.counters.max_q_norm, k.max_q_norm / k.q_max);
    } catch (const SandwichViolation& v) {
      ++out.sandwich_failures;
      if (out.first_failure.empty()) out.first_failure = v.what();
    }
  }
  return out;
}

Outcome exact_representation() {
  Rng rng = Rng::stream(1, 0, StreamPurpose::kGenerator);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int ns = 1 + rng.below(4);
    const int na = 1 + rng.below(3);
    const auto inst = random_mdp(rng.next(), ns, na, rng.uniform(0.0, 0.99));
    const SwitchingSystem sys(inst.mdp, inst.sampling, rng.uniform(1e-3, 0.999),
                              optimal_q(inst.mdp));
    const QVector q = random_vector(rng, ns * na, -10.0, 10.0);
    const Sample x = sample_transition(inst.mdp, inst.sampling, rng);
    const QVector tabular = q_update(inst.mdp, q, x, sys.alpha());
    worst = std::max(worst, (sys.matrix_step(q, x) - tabular).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sys.switching_step(q, x) - tabular).lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-12, fmt("max |difference| %.3g over 1000 triples (tol 1e-12)", worst)};
}

Outcome contraction_suite() {
  Rng rng = Rng::stream(3, 0, StreamPurpose::kGenerator);
  long policies = 0, bad_norm = 0, bad_sign = 0;
  double worst_excess = -1.0, worst_entry = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int ns = 1 + rng.below(6);
    const int na = 1 + rng.below(4);  // |Theta| <= 4^6 = 4096
    const auto inst = random_mdp(rng.next(), ns, na, rng.uniform(0.0, 0.99));
    const auto occ = occupation_measure(inst.sampling);
    const double alpha = rng.uniform(1e-3, 0.999);
    for (const auto& pi : enumerate_policies(ns, na)) {
      const SubsystemA sa = build_A(inst.mdp, occ, alpha, pi);
      const double excess = inf_norm(sa.a) - sa.rho;
      worst_excess = std::max(worst_excess, excess);
      worst_entry = std::min(worst_entry, sa.a.minCoeff());
      if (excess > 1e-12) ++bad_norm;
      if (!is_nonnegative(sa.a, 1e-15)) ++bad_sign;
      ++policies;
    }
  }
  return {bad_norm == 0 && bad_sign == 0,
          fmt("%.0f policies; max(||A||_inf - rho) = %.3g, min entry %.3g", double(policies),
              worst_excess, worst_entry)};
}

Outcome switching_decay() {
  Rng rng = Rng::stream(4, 0, StreamPurpose::kGenerator);
  long violations = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int ns = 1 + rng.below(4);
    const int na = 1 + rng.below(3);
    const auto inst = random_mdp(rng.next(), ns, na, rng.uniform(0.0, 0.99));
    const auto occ = occupation_measure(inst.sampling);
    const double alpha = rng.uniform(1e-3, 0.999);
    const double r = rho(alpha, occ.d_min, inst.mdp.gamma());
    std::vector<DeterministicPolicy> seq(1000);
    for (auto& pi : seq) {
      pi.actions.resize(ns);
      for (auto& a : pi.actions) a = rng.below(na);
    }
    const auto norms = simulate_deterministic_switching(inst.mdp, occ, alpha, seq,
                                                        random_vector(rng, ns * na, -1.0, 1.0));
    for (std::size_t k = 0; k < norms.size(); ++k) {
      const double bound = std::pow(r, double(k)) * norms[0];
      if (norms[k] > bound * (1 + 1e-10)) ++violations;
      if (bound > 0) worst = std::max(worst, norms[k] / bound);
    }
  }
  return {violations == 0,
          fmt("100 sequences x 1000 steps, %.0f violations, max ||x_k|| / (rho^k ||x_0||) = %.6f",
              double(violations), worst)};
}

Outcome noise_suite() {
  Rng rng = Rng::stream(5, 0, StreamPurpose::kGenerator);
  double worst_mean = 0.0, worst_ratio = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double gamma = std::vector<double>{0.0, 0.5, 0.9}[i % 3];
    const int ns = 1 + rng.below(4);
    const int na = 1 + rng.below(3);
    const auto inst = random_mdp(rng.next(), ns, na, gamma);
    const double radius = 1.0 / (1.0 - gamma);
    for (int j = 0; j < 100; ++j) {
      const QVector q = random_vector(rng, ns * na, -radius, radius);
      worst_mean = std::max(worst_mean, expected_noise(inst.mdp, inst.sampling, q)
                                            .lpNorm<Eigen::Infinity>());
      worst_ratio = std::max(worst_ratio,
                             noise_second_moment(inst.mdp, inst.sampling, q) / w_max(gamma));
    }
  }
  return {worst_mean <= 1e-10 && worst_ratio <= 1.0,
          fmt("max ||E[w|Q]||_inf = %.3g (tol 1e-10), max E[w'w|Q] / W_max = %.4f", worst_mean,
              worst_ratio)};
}

struct DominanceRun {
  VerificationReport report;
  InvariantCounters counters;
};

Outcome bound_dominance(DominanceRun& run) {
  const auto inst = random_mdp(2024, 3, 2, 0.9);
  const Problem problem = make_problem(inst.mdp, inst.sampling);
  ExperimentConfig c;
  c.alpha = 0.01;
  c.horizon = 10'000;
  c.n_trials = 1000;
  c.base_seed = 8;
  run.report = verify_experiment(problem, c);
  run.counters = run.report.counters;

  long failed_rows = 0;
  double worst_ratio = 0.0;
  for (const auto& b : run.report.bounds) {
    if (!b.enforced) continue;
    if (!b.pass) ++failed_rows;
    worst_ratio = std::max(worst_ratio, (b.mean + 3 * b.std_error) / b.bound);
  }

  // Pointwise ordering of the relaxations beyond the coupling peak.
  const BoundInputs in = bound_inputs(problem, c);
  const double k0 = std::ceil(coupling_peak(in));
  long order_violations = 0;
  for (double k = k0; k <= 200 * k0; k += std::max(1.0, std::floor(k0 / 50))) {
    const double t2 = theorem2_bound(k, in);
    const double ca = corollary_bound_a(k, in);
    const double cb = corollary_bound_b(k, in);
    if (ca < t2 || cb < ca) ++order_violations;
  }
  for (const auto& e : run.report.metrics.front().second) {
    const double k = double(e.k);
    if (k < k0) continue;
    if (corollary_bound_a(k, in) < theorem2_bound(k, in) ||
        corollary_bound_b(k, in) < corollary_bound_a(k, in)) {
      ++order_violations;
    }
  }
  bool suites_ok = true;
  for (const auto& s : run.report.suites) suites_ok = suites_ok && s.status != SuiteStatus::kFail;
  return {failed_rows == 0 && order_violations == 0 && suites_ok,
          fmt("%.0f bound rows, max (mean + 3 SE) / bound = %.4f, ordering violations for "
              "k >= %.0f: ",
              double(run.report.bounds.size()), worst_ratio, k0) +
              std::to_string(order_violations) + (suites_ok ? "" : "; an invariant suite failed")};
}

Outcome trace_suite() {
  Rng rng = Rng::stream(9, 0, StreamPurpose::kGenerator);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const int ns = 1 + rng.below(4);
    const int na = 1 + rng.below(3);
    const double gamma = rng.uniform(0.0, 0.95);
    const auto inst = random_mdp(rng.next(), ns, na, gamma);
    const auto occ = occupation_measure(inst.sampling);
    const QVector q_star = optimal_q(inst.mdp);
    const double alpha = rng.uniform(1e-3, 0.5);
    const int n = ns * na;
    const Matrix a = build_A(inst.mdp, occ, alpha, greedy_policy(q_star, ns)).a;
    const Matrix w = w_max(gamma) * Matrix::Identity(n, n);
    const Vector x0 = random_vector(rng, n, 0.0, 1.0) - q_star;
    BoundInputs in;
    in.n = n;
    in.d_min = occ.d_min;
    in.d_max = occ.d_max;
    in.gamma = gamma;
    in.alpha = alpha;
    in.q0_err_l2 = x0.norm();
    Matrix x = x0 * x0.transpose();
    for (int k = 1; k <= 1000; ++k) {
      x = autocorrelation_step(x, a, w, alpha);
      if (k == 1 || k == 10 || k == 100 || k == 1000) {
        worst = std::max(worst, x.trace() / trace_bound(k, in));
      }
    }
  }
  return {worst <= 1.0 + 1e-9, fmt("max tr(X_k) / bound = %.6f at k in {1,10,100,1000}", worst)};
}

Outcome complexity_end_to_end() {
  constexpr double kEps = 0.2;
  // Uniform sampling on a seeded 2x2 MDP with gamma = 0.1 keeps k_min below
  // the 10^6 step cap.
  auto inst = random_mdp(10, 2, 2, 0.1);
  inst.sampling.state_dist = Vector::Constant(2, 0.5);
  inst.sampling.behavior = Matrix::Constant(2, 2, 0.5);
  const Problem problem = make_problem(inst.mdp, inst.sampling);
  const auto occ = occupation_measure(inst.sampling);
  const double n = inst.mdp.n_pairs();
  const SampleComplexity sc = sample_complexity(kEps, n, occ.d_min, occ.d_max, inst.mdp.gamma());

  BoundInputs in;
  in.n = n;
  in.d_min = occ.d_min;
  in.d_max = occ.d_max;
  in.gamma = inst.mdp.gamma();
  in.alpha = sc.alpha;
  const double k = static_cast<double>(sc.k_min);
  const double limit = kEps / 3 + 1e-9;
  const auto t2 = theorem2_terms(k, in, LeadingTerm::kGammaWeighted);
  const auto ca = corollary_a_terms(k, in, LeadingTerm::kGammaWeighted);
  const auto cb = corollary_b_terms(k, in, LeadingTerm::kGammaWeighted);
  const bool terms_ok = t2.bias <= limit && t2.transient <= limit && t2.coupling <= limit &&
                        ca.coupling <= limit && cb.coupling <= limit;
  const double worst_term = std::max({t2.bias, t2.transient, t2.coupling, ca.coupling, cb.coupling});

  const long steps = static_cast<long>(std::min<std::uint64_t>(sc.k_min, 1'000'000));
  ExperimentConfig c;
  c.alpha = sc.alpha;
  c.horizon = steps;
  c.n_trials = 20;
  c.base_seed = 10;
  c.checkpoints = {0, steps};
  const TrialEstimates est = run_trials(problem, c);
  const Estimate& last = est.err_inf.back();
  const bool empirical_ok = last.mean <= kEps;

  std::string detail = fmt("alpha = %.4g, k_min = %.0f, simulated %.0f steps; ", sc.alpha, k,
                           double(steps));
  detail += fmt("E||Q_k - Q*||_inf = %.3g +- %.2g (eps %.2g); ", last.mean, last.std_error, kEps);
  detail += fmt("largest term %.6f vs eps/3 = %.6f", worst_term, kEps / 3);
  return {terms_ok && empirical_ok, detail};
}

#ifndef SWITCHQ_CLI_PATH
#define SWITCHQ_CLI_PATH "switchq"
#endif

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "switchq_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string cli = SWITCHQ_CLI_PATH;
  const std::string m = (dir / "m.json").string();

  struct Command {
    std::string name;
    std::string args;
    std::string env;
  };
  const std::vector<Command> commands = {
      {"generate", "generate --seed 7 -s 3 -a 2 --gamma 0.9", ""},
      {"solve", "solve " + m, ""},
      {"simulate", "simulate " + m + " --seed 5 -k 2000 -n 20", ""},
      {"verify", "verify " + m + " --seed 5 -k 2000 -n 100", ""},
      {"verify-threads", "verify " + m + " --seed 5 -k 2000 -n 100", "SWITCHQ_THREADS=3 "},
      {"bounds", "bounds " + m + " --alpha 0.01 -k 100000", ""},
      {"complexity", "complexity " + m + " --epsilon 0.2", ""},
  };
  if (shell(cli + " generate --seed 7 -s 3 -a 2 --gamma 0.9 -o " + m) != 0) {
    return {false, "could not run " + cli};
  }
  int mismatches = 0;
  std::string which;
  for (const auto& c : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const auto file = dir / (c.name + "_" + std::to_string(run) + ".out");
      const int code = shell(c.env + cli + " " + c.args + " -o " + file.string() + " 2>/dev/null");
      outputs[run] = std::to_string(code) + "\n" + slurp(file);
    }
    if (outputs[0] != outputs[1] || outputs[0].size() < 4) {
      ++mismatches;
      which += " " + c.name;
    }
  }
  // Schedule invariance: the threaded report equals the default one.
  if (slurp(dir / "verify_0.out") != slurp(dir / "verify-threads_0.out")) {
    ++mismatches;
    which += " verify(threads)";
  }
  std::filesystem::remove_all(dir);
  return {mismatches == 0, std::to_string(commands.size()) +
                               " commands run twice, byte-identical outputs" +
                               (which.empty() ? "" : "; mismatches:" + which)};
}

}  // namespace

int main() {
  std::printf("acceptance suite (%s build)\n",
#ifdef NDEBUG
              "optimized"
#else
              "debug"
#endif
  );

  criterion(1, "exact representation", 10, exact_representation);

  SandwichRuns sandwich;
  criterion(2, "sandwich ordering", 120, [&] {
    sandwich = run_sandwich_suite();
    const bool ok = sandwich.sandwich_failures == 0 && sandwich.counters.max_sandwich_gap <= 1e-10;
    return Outcome{ok, fmt("%.0f coupled steps, max ordering violation %.3g (tol 1e-10)",
                           double(sandwich.counters.steps), sandwich.counters.max_sandwich_gap) +
                           (sandwich.first_failure.empty() ? "" : "; " + sandwich.first_failure)};
  });

  criterion(3, "contraction and nonnegativity", 30, contraction_suite);
  criterion(4, "deterministic switching decay", 30, switching_decay);
  criterion(5, "noise mean and second moment", 30, noise_suite);

  DominanceRun dominance;
  Outcome dominance_outcome;
  const auto dominance_start = std::chrono::steady_clock::now();
  try {
    dominance_outcome = bound_dominance(dominance);
  } catch (const std::exception& e) {
    dominance_outcome = {false, std::string("exception: ") + e.what()};
  }
  const double dominance_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - dominance_start).count();

  criterion(6, "boundedness", 0, [&] {
    const long violations = sandwich.counters.norm_violations + dominance.counters.norm_violations;
    const long steps = sandwich.counters.steps + dominance.counters.steps;
    return Outcome{violations == 0 && steps > 0,
                   fmt("%.0f steps, %.0f violations of ||Q_k||_inf <= Q_max", double(steps),
                       double(violations))};
  });

  criterion(7, "error-system identity", 0, [&] {
    return Outcome{sandwich.counters.identity_violations == 0 && sandwich.counters.steps > 0,
                   fmt("max |predicted - simulated| = %.3g over %.0f steps (tol 1e-12)",
                       sandwich.counters.max_identity_gap, double(sandwich.counters.steps))};
  });

  criterion(8, "bound dominance", 300, [&] {
    Outcome o = dominance_outcome;
    o.detail += fmt("; Monte Carlo took %.1f s", dominance_secs);
    if (dominance_secs > 300) o.pass = false;
    return o;
  });

  criterion(9, "trace bound", 0, trace_suite);
  criterion(10, "sample complexity end to end", 0, complexity_end_to_end);
  criterion(11, "determinism", 0, determinism);

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
