#pragma once

#include "switchq/bounds.hpp"
#include "switchq/dynamics.hpp"
#include "switchq/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace switchq {

/// An MDP with its sampling model and a precomputed Q*.
struct Problem {
  Mdp mdp;
  SamplingModel sampling;
  QVector q_star;
};

Problem make_problem(Mdp mdp, SamplingModel sampling, double tol = 1e-12);

struct ExperimentConfig {
  double alpha = 0.01;
  long horizon = 10'000;
  long n_trials = 1000;
  /// Empty means geometric_checkpoints(horizon).
  std::vector<long> checkpoints;
  std::uint64_t base_seed = 0;
  /// 0 picks SWITCHQ_THREADS, then the hardware concurrency.
  unsigned threads = 0;
  /// Initial iterate; zero when unset.
  std::optional<QVector> q0;
  double sandwich_tol = kSandwichTolerance;
  double identity_tol = 1e-12;
  /// Multiplies every bound before comparison. Only meant for exercising the
  /// failure path.
  double bound_scale = 1.0;
  bool record_trajectories = false;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  std::vector<long> resolved_checkpoints() const;
};

/// 0, 1, 2, 5, 10, 20, 50, ... up to horizon, with horizon itself last.
std::vector<long> geometric_checkpoints(long horizon);

/// Worker count from SWITCHQ_THREADS, else hardware concurrency.
unsigned default_thread_count();

struct Estimate {
  long k = 0;
  double mean = 0.0;
  double std_error = 0.0;
  long n_trials = 0;
};

/// Mean and standard error (sample std / sqrt(n)); zero error for one value.
Estimate make_estimate(long k, std::span<const double> values);

struct TrajectoryRow {
  long trial = 0;
  long k = 0;
  double err_inf = 0.0;
  double err_lower_l2 = 0.0;
  double err_lower_inf = 0.0;
  double gap_upper_lower_inf = 0.0;
  bool sandwich_ok = true;
};

struct InvariantCounters {
  long steps = 0;
  long sandwich_violations = 0;
  long norm_violations = 0;
  long identity_violations = 0;
  double max_sandwich_gap = 0.0;
  double max_identity_gap = 0.0;
  double max_q_norm = 0.0;
  double q_max = 0.0;
};

struct TrialEstimates {
  std::vector<Estimate> err_inf;
  std::vector<Estimate> err_lower_l2;
  std::vector<Estimate> err_lower_inf;
  std::vector<Estimate> gap_upper_lower_inf;
  InvariantCounters counters;
  std::vector<TrajectoryRow> rows;  // filled when record_trajectories is set
};

/**
 * Runs n_trials coupled paths. Trial t draws from streams keyed by
 * (base_seed, t), and the reduction runs in trial order, so the result does
 * not depend on the worker count. A sandwich violation is rethrown as
 * SandwichViolation carrying the trial, step and component.
 */
TrialEstimates run_trials(const Problem& problem, const ExperimentConfig& config);

struct BoundCheck {
  std::string curve;
  std::string metric;
  long k = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool enforced = true;
  bool pass = true;
};

enum class SuiteStatus { kPass, kFail, kSkipped };

struct SuiteResult {
  std::string name;
  SuiteStatus status = SuiteStatus::kPass;
  long checks = 0;
  long violations = 0;
  double worst = 0.0;
  std::string detail;
};

struct ProblemSummary {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  double d_min = 0.0;
  double d_max = 0.0;
  double rho = 0.0;
  double q_max = 0.0;
  double r_max = 0.0;
};

struct VerificationReport {
  ExperimentConfig config;
  ProblemSummary problem;
  std::vector<std::pair<std::string, std::vector<Estimate>>> metrics;
  std::vector<BoundCheck> bounds;
  std::vector<SuiteResult> suites;
  InvariantCounters counters;
  /// Not serialized, so reports stay byte-identical across runs.
  double wall_seconds = 0.0;

  bool pass() const;
};

BoundInputs bound_inputs(const Problem& problem, const ExperimentConfig& config);
ProblemSummary summarize(const Problem& problem, const ExperimentConfig& config);

/// Pass criterion per row: mean + 3 * std_error <= bound_scale * bound.
VerificationReport verify_bounds(const TrialEstimates& estimates, const BoundInputs& inputs,
                                 double bound_scale = 1.0);

/// Full invariant suite. Reuses `run` for the path-wise checks when given.
VerificationReport verify_invariants(const Problem& problem, const ExperimentConfig& config,
                                     const TrialEstimates* run = nullptr);

/// run_trials + verify_bounds + verify_invariants.
VerificationReport verify_experiment(const Problem& problem, const ExperimentConfig& config);

}  // namespace switchq
