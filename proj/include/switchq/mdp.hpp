#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace switchq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Q-function stacked action-major: block a holds Q(., a), so the entry for
/// the pair (s, a) lives at a * n_states + s.
using QVector = Eigen::VectorXd;

inline int pair_index(int n_states, int s, int a) { return a * n_states + s; }

/**
 * Finite discounted MDP with a deterministic reward per transition.
 *
 * Transition and reward tensors are stored flat in [s][a][s'] order. The
 * constructor only checks shapes; probabilistic and boundedness conditions
 * are reported by validate_mdp().
 */
class Mdp {
public:
  Mdp(int n_states, int n_actions, std::vector<double> transition,
      std::vector<double> reward, double gamma);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int n_pairs() const { return n_states_ * n_actions_; }
  double gamma() const { return gamma_; }

  double p(int s, int a, int s_next) const { return transition_[offset(s, a) + s_next]; }
  double r(int s, int a, int s_next) const { return reward_[offset(s, a) + s_next]; }

  /// P(s, a, .) as a contiguous row.
  std::span<const double> next_state_row(int s, int a) const {
    return {transition_.data() + offset(s, a), static_cast<std::size_t>(n_states_)};
  }

  /// R_a(s) = E[r(s, a, s') | s, a].
  double expected_reward(int s, int a) const;
  /// max |r(s, a, s')|
  double r_max() const;

  const std::vector<double>& transition() const { return transition_; }
  const std::vector<double>& reward() const { return reward_; }

  bool operator==(const Mdp&) const = default;

private:
  std::size_t offset(int s, int a) const {
    return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_;
  }

  int n_states_;
  int n_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  double gamma_;
};

/// State distribution p and behavior policy beta(a|s) generating i.i.d. samples.
struct SamplingModel {
  Vector state_dist;  // length |S|
  Matrix behavior;    // |S| x |A|, row-stochastic

  bool operator==(const SamplingModel& other) const {
    return state_dist == other.state_dist && behavior == other.behavior;
  }
};

/// d(s, a) = p(s) beta(a|s) in action-major order.
struct OccupationMeasure {
  Vector d;
  double d_min = 0.0;
  double d_max = 0.0;
};

struct DeterministicPolicy {
  std::vector<int> actions;  // actions[s] in [0, n_actions)

  bool operator==(const DeterministicPolicy&) const = default;
};

struct ValidationCheck {
  std::string name;
  bool ok = true;
  std::string detail;  // names the violating index when !ok
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  /// Result of the named check; nullopt if it was not run.
  std::optional<bool> passed(std::string_view name) const;
  const ValidationCheck* find(std::string_view name) const;
};

struct ValidationOptions {
  double prob_tol = 1e-12;
  /// Enforce R_max <= 1. Boundedness of the iterates holds without it, so
  /// callers may relax it.
  bool enforce_unit_reward = true;
};

// Check names used in ValidationReport.
inline constexpr std::string_view kCheckShape = "shape";
inline constexpr std::string_view kCheckTransition = "transition_stochastic";
inline constexpr std::string_view kCheckDiscount = "discount_range";
inline constexpr std::string_view kCheckReward = "reward_bound";
inline constexpr std::string_view kCheckStateDist = "state_distribution";
inline constexpr std::string_view kCheckBehavior = "behavior_policy";
inline constexpr std::string_view kCheckOccupation = "occupation_positive";

ValidationReport validate_mdp(const Mdp& mdp, const SamplingModel& sampling,
                              const ValidationOptions& options = {});

/// Throws std::domain_error if some d(s, a) is not strictly positive.
OccupationMeasure occupation_measure(const SamplingModel& sampling);

/// Vector of expected rewards R, stacked action-major.
Vector expected_reward_vector(const Mdp& mdp);

/// (T Q)(s, a) = sum_{s'} P(s, a, s') [r(s, a, s') + gamma max_u Q(s', u)]
QVector bellman_operator(const Mdp& mdp, const QVector& q);
double bellman_residual(const Mdp& mdp, const QVector& q);

/**
 * Optimal Q-function by fixed-point iteration from zero.
 *
 * Iterates until ||Q_{t+1} - Q_t||_inf <= tol (1 - gamma) / gamma, which
 * gives a Bellman residual of at most tol. The result is then polished by
 * exact evaluation of its greedy policy, kept only if the greedy policy is
 * unchanged and the residual shrinks. Throws std::invalid_argument for
 * tol <= 0 and std::runtime_error if the iteration cap is hit.
 */
QVector optimal_q(const Mdp& mdp, double tol = 1e-12);

/// Per-state argmax; ties go to the smallest action index.
DeterministicPolicy greedy_policy(const QVector& q, int n_states);

/// max{R_max, max_{s,a} Q_0(s, a)} / (1 - gamma)
double q_max_bound(const Mdp& mdp, const QVector& q0);

struct RandomInstance {
  Mdp mdp;
  SamplingModel sampling;
};

/// Seeded random instance. Rows of P are normalized positive uniforms,
/// rewards are uniform in [-1, 1], p and beta are strictly positive.
RandomInstance random_mdp(std::uint64_t seed, int n_states, int n_actions,
                          double gamma = 0.9);

/// Stationary distribution of the state chain M(s, s') = sum_a beta(a|s) P(s, a, s').
/// Runs power iteration on the lazy chain (I + M) / 2 until ||p M - p||_1 <= tol.
/// Throws std::runtime_error after max_iter iterations.
Vector stationary_distribution(const Mdp& mdp, const Matrix& behavior, double tol = 1e-12,
                               long max_iter = 1'000'000);

// Policy space Theta, ordered lexicographically with state 0 as the most
// significant digit.

inline constexpr std::uint64_t kMaxPolicyCount = 1'000'000;

/// |A|^|S|; throws std::overflow_error above kMaxPolicyCount.
std::uint64_t policy_count(int n_states, int n_actions);
std::uint64_t policy_index(const DeterministicPolicy& policy, int n_actions);
DeterministicPolicy policy_from_index(std::uint64_t index, int n_states, int n_actions);
/// Advances to the next policy in lexicographic order; false after the last one.
bool next_policy(DeterministicPolicy& policy, int n_actions);
std::vector<DeterministicPolicy> enumerate_policies(int n_states, int n_actions);

}  // namespace switchq
