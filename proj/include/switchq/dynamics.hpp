#pragma once

#include "switchq/matrix_forms.hpp"
#include "switchq/mdp.hpp"
#include "switchq/rng.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace switchq {

/// One observation (s_k, a_k, s_k', r_k).
struct Sample {
  int s = 0;
  int a = 0;
  int s_next = 0;
  double r = 0.0;
};

/// Draws i.i.d. samples s ~ p, a ~ beta(.|s), s' ~ P(s, a, .).
class Sampler {
public:
  Sampler(const Mdp& mdp, const SamplingModel& sampling);

  Sample draw(Rng& rng) const;

private:
  int n_states_;
  int n_actions_;
  std::vector<double> reward_;          // [s][a][s']
  std::vector<double> state_cdf_;
  std::vector<double> behavior_cdf_;    // [s][a]
  std::vector<double> transition_cdf_;  // [s][a][s']
};

Sample sample_transition(const Mdp& mdp, const SamplingModel& sampling, Rng& rng);

/// delta = r + gamma max_u Q(s', u) - Q(s, a)
double td_error(const Mdp& mdp, const QVector& q, const Sample& sample);

/// Tabular Q-learning step: only entry (s, a) moves, by alpha * delta.
QVector q_update(const Mdp& mdp, const QVector& q, const Sample& sample, double alpha);

/**
 * Q-learning written as a stochastic affine switching system around Q*.
 *
 * Holds the stacked transition matrix, the occupation measure, the expected
 * reward vector and Q* with its greedy policy. Products with A_pi and B are
 * applied row-wise without forming the dense matrices.
 */
class SwitchingSystem {
public:
  SwitchingSystem(const Mdp& mdp, const SamplingModel& sampling, double alpha, QVector q_star);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int n_pairs() const { return n_states_ * n_actions_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  double rho() const { return rho_; }
  const OccupationMeasure& occupation() const { return occ_; }
  const Matrix& stacked() const { return stacked_; }
  const Vector& reward() const { return reward_; }
  const QVector& q_star() const { return q_star_; }
  const DeterministicPolicy& optimal_policy() const { return pi_star_; }

  /// DR + gamma D P Pi_Q Q - D Q
  Vector drift(const QVector& q) const;
  /// (e_a (x) e_s) delta - drift(Q)
  Vector noise(const QVector& q, const Sample& sample) const;

  /// A_pi x
  Vector apply_A(const DeterministicPolicy& policy, const Vector& x) const;
  /// B x with B = alpha gamma D P (Pi^pi - Pi^{pi*})
  Vector apply_B(const DeterministicPolicy& policy, const Vector& x) const;
  /// alpha gamma D P (Pi_Q - Pi_{Q*}) Q*
  Vector affine_term(const QVector& q) const;

  /// Q + alpha (DR + gamma D P Pi_Q Q - D Q + w)
  QVector matrix_step(const QVector& q, const Sample& sample) const;
  /// Q* + A_Q (Q - Q*) + b_Q + alpha w
  QVector switching_step(const QVector& q, const Sample& sample) const;

private:
  // (Pi^pi x)(s) = x(s, pi(s))
  Vector gather(const DeterministicPolicy& policy, const Vector& x) const;

  int n_states_;
  int n_actions_;
  double gamma_;
  double alpha_;
  double rho_;
  OccupationMeasure occ_;
  Matrix stacked_;
  Vector reward_;
  QVector q_star_;
  DeterministicPolicy pi_star_;
};

/// Original, lower and upper iterates of one Monte Carlo path.
struct CoupledState {
  QVector q;
  QVector q_lower;
  QVector q_upper;
  long step = 0;
};

inline constexpr double kSandwichTolerance = 1e-10;

/// Raised when Q^L - Q* <= Q - Q* <= Q^U - Q* fails beyond tolerance.
class SandwichViolation : public std::runtime_error {
public:
  SandwichViolation(long step, int index, double amount, long trial = -1);

  long step() const { return step_; }
  int index() const { return index_; }
  double amount() const { return amount_; }
  long trial() const { return trial_; }

  SandwichViolation with_trial(long trial) const { return {step_, index_, amount_, trial}; }

private:
  long step_;
  int index_;
  double amount_;
  long trial_;
};

CoupledState initial_coupled_state(const QVector& q0);

/// Largest ordering violation (0 if the sandwich holds) and its index.
struct SandwichGap {
  double amount = 0.0;
  int index = -1;
};
SandwichGap sandwich_gap(const CoupledState& state, const QVector& q_star);

/// Extra per-step information from step_coupled.
struct StepDiagnostics {
  /// |predicted - simulated| for Q^U_{k+1} - Q^L_{k+1}, when requested.
  double error_identity_gap = 0.0;
};

/**
 * Advances the three systems with a single shared noise w_k computed from
 * the original iterate Q_k:
 *   Q   <- Algorithm 1 step
 *   Q^L <- Q* + A_{Q*} (Q^L - Q*) + alpha w
 *   Q^U <- Q* + A_{Q_k} (Q^U - Q*) + alpha w
 * Throws SandwichViolation if the ordering breaks by more than tol.
 */
CoupledState step_coupled(const CoupledState& state, const Sample& sample,
                          const SwitchingSystem& system, double tol = kSandwichTolerance,
                          StepDiagnostics* diagnostics = nullptr);

/// Predicted Q^U_{k+1} - Q^L_{k+1} = A_{Q_k} (Q^U - Q^L) + B_{Q_k} (Q^L - Q*).
Vector error_system_step(const QVector& q_upper, const QVector& q_lower, const QVector& q,
                         const SwitchingSystem& system);

/// E[w | Q] by enumeration over (s, a, s') weighted by d(s, a) P(s, a, s').
Vector expected_noise(const Mdp& mdp, const SamplingModel& sampling, const QVector& q);
/// E[w^T w | Q] by enumeration.
double noise_second_moment(const Mdp& mdp, const SamplingModel& sampling, const QVector& q);
/// E[w w^T | Q] by enumeration.
Matrix noise_covariance(const Mdp& mdp, const SamplingModel& sampling, const QVector& q);

/// ||x_k||_inf for k = 0..K under x_{k+1} = A_{sigma_k} x_k, K = sequence size.
std::vector<double> simulate_deterministic_switching(const Mdp& mdp, const OccupationMeasure& occ,
                                                     double alpha,
                                                     std::span<const DeterministicPolicy> sequence,
                                                     const Vector& x0);

/// X' = A X A^T + alpha^2 W
Matrix autocorrelation_step(const Matrix& x, const Matrix& a, const Matrix& w, double alpha);

/// Trial average of x x^T.
Matrix empirical_autocorrelation(std::span<const Vector> samples);

}  // namespace switchq
