#include "switchq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace switchq {

Problem make_problem(Mdp mdp, SamplingModel sampling, double tol) {
  QVector q_star = optimal_q(mdp, tol);
  return {std::move(mdp), std::move(sampling), std::move(q_star)};
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  for (long k : checkpoints) {
    if (k < 0 || k > horizon) throw std::invalid_argument("checkpoints must lie in [0, horizon]");
  }
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end()) {
    throw std::invalid_argument("checkpoints must be strictly increasing");
  }
  if (!(bound_scale >= 0.0)) throw std::invalid_argument("bound_scale must be nonnegative");
}

std::vector<long> ExperimentConfig::resolved_checkpoints() const {
  return checkpoints.empty() ? geometric_checkpoints(horizon) : checkpoints;
}

std::vector<long> geometric_checkpoints(long horizon) {
  std::vector<long> out{0};
  for (long decade = 1; decade <= horizon && decade > 0; decade *= 10) {
    for (long m : {1L, 2L, 5L}) {
      const long k = m * decade;
      if (k <= horizon) out.push_back(k);
    }
  }
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("SWITCHQ_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Estimate make_estimate(long k, std::span<const double> values) {
  Estimate e;
  e.k = k;
  e.n_trials = static_cast<long>(values.size());
  if (values.empty()) return e;
  // Deviations from the first value keep identical samples exact.
  const double shift = values.front();
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double mean_dev = sum / n;
  e.mean = shift + mean_dev;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - shift - mean_dev) * (v - shift - mean_dev);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

namespace {

constexpr int kMetricCount = 4;

struct TrialResult {
  std::vector<std::array<double, kMetricCount>> metrics;  // per checkpoint
  std::vector<bool> sandwich_ok;
  InvariantCounters counters;
};

std::array<double, kMetricCount> measure(const CoupledState& state, const QVector& q_star) {
  const Vector lower_err = state.q_lower - q_star;
  return {(state.q - q_star).lpNorm<Eigen::Infinity>(), lower_err.norm(),
          lower_err.lpNorm<Eigen::Infinity>(),
          (state.q_upper - state.q_lower).lpNorm<Eigen::Infinity>()};
}

TrialResult run_one_trial(long trial, const Problem& problem, const SwitchingSystem& system,
                          const Sampler& sampler, const QVector& q0, double q_max,
                          const std::vector<long>& checkpoints, const ExperimentConfig& config) {
  TrialResult result;
  result.metrics.reserve(checkpoints.size());
  Rng rng = Rng::stream(config.base_seed, static_cast<std::uint64_t>(trial),
                        StreamPurpose::kSampling);
  CoupledState state = initial_coupled_state(q0);
  std::size_t next_checkpoint = 0;
  const double norm_limit = q_max * (1.0 + 1e-12) + 1e-12;

  auto record = [&] {
    while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == state.step) {
      result.metrics.push_back(measure(state, problem.q_star));
      result.sandwich_ok.push_back(sandwich_gap(state, problem.q_star).amount <= config.sandwich_tol);
      ++next_checkpoint;
    }
  };

  record();
  StepDiagnostics diagnostics;
  for (long k = 0; k < config.horizon; ++k) {
    const Sample sample = sampler.draw(rng);
    try {
      state = step_coupled(state, sample, system, config.sandwich_tol, &diagnostics);
    } catch (const SandwichViolation& v) {
      throw v.with_trial(trial);
    }
    auto& c = result.counters;
    ++c.steps;
    c.max_identity_gap = std::max(c.max_identity_gap, diagnostics.error_identity_gap);
    if (diagnostics.error_identity_gap > config.identity_tol) ++c.identity_violations;
    const double q_norm = state.q.lpNorm<Eigen::Infinity>();
    c.max_q_norm = std::max(c.max_q_norm, q_norm);
    if (q_norm > norm_limit) ++c.norm_violations;
    c.max_sandwich_gap = std::max(c.max_sandwich_gap, sandwich_gap(state, problem.q_star).amount);
    record();
  }
  return result;
}

void merge_counters(InvariantCounters& into, const InvariantCounters& from) {
  into.steps += from.steps;
  into.sandwich_violations += from.sandwich_violations;
  into.norm_violations += from.norm_violations;
  into.identity_violations += from.identity_violations;
  into.max_sandwich_gap = std::max(into.max_sandwich_gap, from.max_sandwich_gap);
  into.max_identity_gap = std::max(into.max_identity_gap, from.max_identity_gap);
  into.max_q_norm = std::max(into.max_q_norm, from.max_q_norm);
}

QVector initial_iterate(const Problem& problem, const ExperimentConfig& config) {
  if (!config.q0) return QVector::Zero(problem.mdp.n_pairs());
  if (config.q0->size() != problem.mdp.n_pairs()) {
    throw std::invalid_argument("q0 length differs from |S x A|");
  }
  return *config.q0;
}

}  // namespace

TrialEstimates run_trials(const Problem& problem, const ExperimentConfig& config) {
  config.validate();
  const std::vector<long> checkpoints = config.resolved_checkpoints();
  const QVector q0 = initial_iterate(problem, config);
  const SwitchingSystem system(problem.mdp, problem.sampling, config.alpha, problem.q_star);
  const Sampler sampler(problem.mdp, problem.sampling);
  const double q_max = q_max_bound(problem.mdp, q0);

  const auto n_trials = static_cast<std::size_t>(config.n_trials);
  std::vector<TrialResult> results(n_trials);
  std::vector<std::exception_ptr> errors(n_trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_trials; t = next++) {
      try {
        results[t] = run_one_trial(static_cast<long>(t), problem, system, sampler, q0, q_max,
                                   checkpoints, config);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<std::size_t>(
      config.threads > 0 ? config.threads : default_thread_count(), n_trials);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  TrialEstimates out;
  out.counters.q_max = q_max;
  for (const auto& r : results) merge_counters(out.counters, r.counters);
  std::vector<double> column(n_trials);
  std::vector<Estimate>* targets[kMetricCount] = {&out.err_inf, &out.err_lower_l2,
                                                 &out.err_lower_inf, &out.gap_upper_lower_inf};
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    for (int m = 0; m < kMetricCount; ++m) {
      for (std::size_t t = 0; t < n_trials; ++t) column[t] = results[t].metrics[c][m];
      targets[m]->push_back(make_estimate(checkpoints[c], column));
    }
  }
  if (config.record_trajectories) {
    out.rows.reserve(n_trials * checkpoints.size());
    for (std::size_t t = 0; t < n_trials; ++t) {
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const auto& m = results[t].metrics[c];
        out.rows.push_back({static_cast<long>(t), checkpoints[c], m[0], m[1], m[2], m[3],
                            static_cast<bool>(results[t].sandwich_ok[c])});
      }
    }
  }
  return out;
}

bool VerificationReport::pass() const {
  for (const auto& b : bounds) {
    if (b.enforced && !b.pass) return false;
  }
  for (const auto& s : suites) {
    if (s.status == SuiteStatus::kFail) return false;
  }
  return true;
}

BoundInputs bound_inputs(const Problem& problem, const ExperimentConfig& config) {
  const OccupationMeasure occ = occupation_measure(problem.sampling);
  const QVector q0 = initial_iterate(problem, config);
  BoundInputs in;
  in.n = problem.mdp.n_pairs();
  in.d_min = occ.d_min;
  in.d_max = occ.d_max;
  in.gamma = problem.mdp.gamma();
  in.alpha = config.alpha;
  in.q0_err_l2 = (q0 - problem.q_star).norm();
  in.q0_err_inf = (q0 - problem.q_star).lpNorm<Eigen::Infinity>();
  return in;
}

ProblemSummary summarize(const Problem& problem, const ExperimentConfig& config) {
  const OccupationMeasure occ = occupation_measure(problem.sampling);
  ProblemSummary s;
  s.n_states = problem.mdp.n_states();
  s.n_actions = problem.mdp.n_actions();
  s.gamma = problem.mdp.gamma();
  s.d_min = occ.d_min;
  s.d_max = occ.d_max;
  s.rho = rho(config.alpha, occ.d_min, problem.mdp.gamma());
  s.q_max = q_max_bound(problem.mdp, initial_iterate(problem, config));
  s.r_max = problem.mdp.r_max();
  return s;
}

VerificationReport verify_bounds(const TrialEstimates& estimates, const BoundInputs& inputs,
                                 double bound_scale) {
  inputs.validate();
  VerificationReport report;
  report.metrics = {{"err_inf", estimates.err_inf},
                    {"err_lower_l2", estimates.err_lower_l2},
                    {"err_lower_inf", estimates.err_lower_inf},
                    {"gap_upper_lower_inf", estimates.gap_upper_lower_inf}};
  report.counters = estimates.counters;

  auto add = [&](const std::string& curve, const std::string& metric, const Estimate& e,
                 double bound, bool enforced) {
    BoundCheck row;
    row.curve = curve;
    row.metric = metric;
    row.k = e.k;
    row.mean = e.mean;
    row.std_error = e.std_error;
    row.bound = bound_scale * bound;
    row.enforced = enforced;
    row.pass = e.mean + 3.0 * e.std_error <= row.bound;
    report.bounds.push_back(row);
  };

  for (const auto& e : estimates.err_lower_l2) {
    add("theorem1", "err_lower_l2", e, theorem1_bound(static_cast<double>(e.k), inputs), true);
  }
  for (const auto& e : estimates.err_inf) {
    const auto k = static_cast<double>(e.k);
    add("theorem2", "err_inf", e, theorem2_bound(k, inputs), true);
    add("corollary_a", "err_inf", e, corollary_bound_a(k, inputs), true);
    add("corollary_b", "err_inf", e, corollary_bound_b(k, inputs), true);
    add("abstract", "err_inf", e, abstract_bound(k, inputs), false);
  }
  return report;
}

namespace {

SuiteResult named_suite(std::string name) {
  SuiteResult s;
  s.name = std::move(name);
  return s;
}

SuiteResult finish(SuiteResult s) {
  if (s.status != SuiteStatus::kSkipped) {
    s.status = s.violations == 0 ? SuiteStatus::kPass : SuiteStatus::kFail;
  }
  return s;
}

QVector random_probe(Rng& rng, int n, double radius) {
  QVector q(n);
  for (int i = 0; i < n; ++i) q(i) = rng.uniform(-radius, radius);
  return q;
}

DeterministicPolicy random_policy(Rng& rng, int n_states, int n_actions) {
  DeterministicPolicy pi;
  pi.actions.resize(n_states);
  for (auto& a : pi.actions) a = rng.below(n_actions);
  return pi;
}

void check_policy_matrices(const Problem& problem, const ExperimentConfig& config,
                           SuiteResult& contraction, SuiteResult& nonnegativity) {
  const Mdp& mdp = problem.mdp;
  const OccupationMeasure occ = occupation_measure(problem.sampling);
  const Matrix stacked = build_stacked(mdp);
  const double r = rho(config.alpha, occ.d_min, mdp.gamma());

  auto check = [&](const DeterministicPolicy& pi) {
    const Matrix a = subsystem_matrix(stacked, occ.d, mdp.gamma(), config.alpha, pi);
    const double norm = inf_norm(a);
    ++contraction.checks;
    contraction.worst = std::max(contraction.worst, norm - r);
    if (norm > r + 1e-12) ++contraction.violations;
    ++nonnegativity.checks;
    nonnegativity.worst = std::min(nonnegativity.worst, a.minCoeff());
    if (!is_nonnegative(a)) ++nonnegativity.violations;
  };

  bool exhaustive = true;
  try {
    (void)policy_count(mdp.n_states(), mdp.n_actions());
  } catch (const std::overflow_error&) {
    exhaustive = false;
  }
  if (exhaustive) {
    DeterministicPolicy pi{std::vector<int>(mdp.n_states(), 0)};
    do {
      check(pi);
    } while (next_policy(pi, mdp.n_actions()));
    contraction.detail = "exhaustive over all deterministic policies";
  } else {
    Rng rng = Rng::stream(config.base_seed, 0, StreamPurpose::kProbe);
    for (int i = 0; i < 10'000; ++i) check(random_policy(rng, mdp.n_states(), mdp.n_actions()));
    contraction.detail = "10000 sampled policies (policy space above enumeration cap)";
  }
  nonnegativity.detail = contraction.detail;
}

}  // namespace

VerificationReport verify_invariants(const Problem& problem, const ExperimentConfig& config,
                                     const TrialEstimates* run) {
  config.validate();
  VerificationReport report;
  report.config = config;
  report.problem = summarize(problem, config);
  const Mdp& mdp = problem.mdp;
  const int n = mdp.n_pairs();
  const QVector q0 = initial_iterate(problem, config);

  // Path-wise suites.
  SuiteResult sandwich = named_suite("sandwich");
  SuiteResult boundedness = named_suite("boundedness");
  SuiteResult identity = named_suite("error_identity");
  std::optional<TrialEstimates> owned;
  try {
    if (run == nullptr) {
      owned = run_trials(problem, config);
      run = &*owned;
    }
    const auto& c = run->counters;
    report.counters = c;
    sandwich.checks = boundedness.checks = identity.checks = c.steps;
    sandwich.violations = c.sandwich_violations;
    sandwich.worst = c.max_sandwich_gap;
    boundedness.violations = c.norm_violations;
    boundedness.worst = c.max_q_norm;
    {
      std::ostringstream os;
      os.precision(17);
      os << "Q_max=" << c.q_max;
      boundedness.detail = os.str();
    }
    identity.violations = c.identity_violations;
    identity.worst = c.max_identity_gap;
  } catch (const SandwichViolation& v) {
    sandwich.violations = 1;
    sandwich.worst = v.amount();
    sandwich.detail = v.what();
    boundedness.status = identity.status = SuiteStatus::kSkipped;
    boundedness.detail = identity.detail = "coupled run aborted by a sandwich violation";
  }
  report.suites.push_back(finish(sandwich));
  report.suites.push_back(finish(boundedness));
  report.suites.push_back(finish(identity));

  SuiteResult contraction = named_suite("contraction");
  SuiteResult nonnegativity = named_suite("nonnegativity");
  nonnegativity.worst = 0.0;
  check_policy_matrices(problem, config, contraction, nonnegativity);
  report.suites.push_back(finish(contraction));
  report.suites.push_back(finish(nonnegativity));

  // Noise suites at Q_0 and at random probes with ||Q||_inf <= 1 / (1 - gamma).
  const double radius = 1.0 / (1.0 - mdp.gamma());
  std::vector<QVector> probes{q0};
  {
    Rng rng = Rng::stream(config.base_seed, 1, StreamPurpose::kProbe);
    for (int i = 0; i < 100; ++i) probes.push_back(random_probe(rng, n, radius));
  }
  SuiteResult mean_zero = named_suite("expected_noise");
  for (const auto& q : probes) {
    const double norm = expected_noise(mdp, problem.sampling, q).lpNorm<Eigen::Infinity>();
    ++mean_zero.checks;
    mean_zero.worst = std::max(mean_zero.worst, norm);
    if (norm > 1e-10) ++mean_zero.violations;
  }
  report.suites.push_back(finish(mean_zero));

  SuiteResult moment = named_suite("noise_second_moment");
  if (mdp.r_max() > 1.0 || q0.lpNorm<Eigen::Infinity>() > 1.0) {
    moment.status = SuiteStatus::kSkipped;
    moment.detail = "precondition not met: requires R_max <= 1 and ||Q_0||_inf <= 1";
  } else {
    const double bound = w_max(mdp.gamma());
    for (const auto& q : probes) {
      const double m = noise_second_moment(mdp, problem.sampling, q);
      ++moment.checks;
      moment.worst = std::max(moment.worst, m);
      if (m > bound) ++moment.violations;
    }
  }
  report.suites.push_back(finish(moment));

  SuiteResult decay = named_suite("switching_decay");
  {
    const OccupationMeasure occ = occupation_measure(problem.sampling);
    const double r = rho(config.alpha, occ.d_min, mdp.gamma());
    Rng rng = Rng::stream(config.base_seed, 2, StreamPurpose::kSwitching);
    constexpr int kSequences = 100;
    constexpr int kLength = 1000;
    std::vector<DeterministicPolicy> sequence(kLength);
    for (int i = 0; i < kSequences; ++i) {
      for (auto& pi : sequence) pi = random_policy(rng, mdp.n_states(), mdp.n_actions());
      Vector x0 = random_probe(rng, n, 1.0);
      const auto norms = simulate_deterministic_switching(mdp, occ, config.alpha, sequence, x0);
      for (std::size_t k = 0; k < norms.size(); ++k) {
        const double limit = std::pow(r, static_cast<double>(k)) * norms[0] * (1.0 + 1e-10);
        ++decay.checks;
        if (norms[k] > limit) {
          ++decay.violations;
          decay.worst = std::max(decay.worst, norms[k] - limit);
        }
      }
    }
  }
  report.suites.push_back(finish(decay));
  return report;
}

VerificationReport verify_experiment(const Problem& problem, const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  VerificationReport report;
  try {
    const TrialEstimates run = run_trials(problem, config);
    report = verify_bounds(run, bound_inputs(problem, config), config.bound_scale);
    VerificationReport invariants = verify_invariants(problem, config, &run);
    report.suites = std::move(invariants.suites);
  } catch (const SandwichViolation&) {
    report = verify_invariants(problem, config, nullptr);
  }
  report.config = config;
  report.problem = summarize(problem, config);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace switchq
