#include "switchq/mdp.hpp"

#include "switchq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace switchq {

Mdp::Mdp(int n_states, int n_actions, std::vector<double> transition,
         std::vector<double> reward, double gamma)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("Mdp: n_states and n_actions must be positive");
  }
  const auto expected = static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (transition_.size() != expected || reward_.size() != expected) {
    throw std::invalid_argument("Mdp: transition and reward must have |S|*|A|*|S| entries");
  }
}

double Mdp::expected_reward(int s, int a) const {
  double acc = 0.0;
  for (int sn = 0; sn < n_states_; ++sn) acc += p(s, a, sn) * r(s, a, sn);
  return acc;
}

double Mdp::r_max() const {
  double m = 0.0;
  for (double v : reward_) m = std::max(m, std::abs(v));
  return m;
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.ok; });
}

const ValidationCheck* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::optional<bool> ValidationReport::passed(std::string_view name) const {
  if (const auto* c = find(name)) return c->ok;
  return std::nullopt;
}

namespace {

bool is_distribution(std::span<const double> row, double tol) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace

ValidationReport validate_mdp(const Mdp& mdp, const SamplingModel& sampling,
                              const ValidationOptions& options) {
  ValidationReport report;
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();

  ValidationCheck shape{std::string(kCheckShape), true, {}};
  if (sampling.state_dist.size() != ns || sampling.behavior.rows() != ns ||
      sampling.behavior.cols() != na) {
    shape.ok = false;
    shape.detail = "sampling model does not match |S| x |A| of the MDP";
  }
  report.checks.push_back(shape);
  if (!shape.ok) return report;

  ValidationCheck transition{std::string(kCheckTransition), true, {}};
  for (int s = 0; s < ns && transition.ok; ++s) {
    for (int a = 0; a < na; ++a) {
      if (!is_distribution(mdp.next_state_row(s, a), options.prob_tol)) {
        transition.ok = false;
        std::ostringstream os;
        os << "P(" << s << "," << a << ",.) is not a probability distribution";
        transition.detail = os.str();
        break;
      }
    }
  }
  report.checks.push_back(transition);

  ValidationCheck discount{std::string(kCheckDiscount), true, {}};
  if (!(mdp.gamma() >= 0.0 && mdp.gamma() < 1.0)) {
    discount.ok = false;
    discount.detail = "gamma must lie in [0, 1)";
  }
  report.checks.push_back(discount);

  if (options.enforce_unit_reward) {
    ValidationCheck reward{std::string(kCheckReward), true, {}};
    const double r_max = mdp.r_max();
    if (!(r_max <= 1.0)) {
      reward.ok = false;
      std::ostringstream os;
      os.precision(17);
      os << "R_max=" << r_max << " exceeds 1";
      reward.detail = os.str();
    }
    report.checks.push_back(reward);
  }

  ValidationCheck state_dist{std::string(kCheckStateDist), true, {}};
  if (!is_distribution({sampling.state_dist.data(), static_cast<std::size_t>(ns)},
                       options.prob_tol)) {
    state_dist.ok = false;
    state_dist.detail = "p is not a probability distribution";
  }
  report.checks.push_back(state_dist);

  ValidationCheck behavior{std::string(kCheckBehavior), true, {}};
  for (int s = 0; s < ns; ++s) {
    double sum = 0.0;
    bool nonneg = true;
    for (int a = 0; a < na; ++a) {
      nonneg = nonneg && sampling.behavior(s, a) >= 0.0;
      sum += sampling.behavior(s, a);
    }
    if (!nonneg || std::abs(sum - 1.0) > options.prob_tol) {
      behavior.ok = false;
      behavior.detail = "beta(.|" + std::to_string(s) + ") is not a probability distribution";
      break;
    }
  }
  report.checks.push_back(behavior);

  ValidationCheck occupation{std::string(kCheckOccupation), true, {}};
  for (int a = 0; a < na && occupation.ok; ++a) {
    for (int s = 0; s < ns; ++s) {
      if (!(sampling.state_dist(s) * sampling.behavior(s, a) > 0.0)) {
        occupation.ok = false;
        occupation.detail =
            "d(" + std::to_string(s) + "," + std::to_string(a) + ") is not positive";
        break;
      }
    }
  }
  report.checks.push_back(occupation);
  return report;
}

OccupationMeasure occupation_measure(const SamplingModel& sampling) {
  const auto ns = static_cast<int>(sampling.behavior.rows());
  const auto na = static_cast<int>(sampling.behavior.cols());
  OccupationMeasure occ;
  occ.d.resize(ns * na);
  for (int a = 0; a < na; ++a) {
    for (int s = 0; s < ns; ++s) {
      const double v = sampling.state_dist(s) * sampling.behavior(s, a);
      if (!(v > 0.0)) {
        throw std::domain_error("occupation_measure: d(" + std::to_string(s) + "," +
                                std::to_string(a) + ") is not positive");
      }
      occ.d(pair_index(ns, s, a)) = v;
    }
  }
  occ.d_min = occ.d.minCoeff();
  occ.d_max = occ.d.maxCoeff();
  return occ;
}

Vector expected_reward_vector(const Mdp& mdp) {
  const int ns = mdp.n_states();
  Vector r(mdp.n_pairs());
  for (int a = 0; a < mdp.n_actions(); ++a) {
    for (int s = 0; s < ns; ++s) r(pair_index(ns, s, a)) = mdp.expected_reward(s, a);
  }
  return r;
}

namespace {

Vector state_values(const Mdp& mdp, const QVector& q) {
  const int ns = mdp.n_states();
  Vector v(ns);
  for (int s = 0; s < ns; ++s) {
    double best = q(s);
    for (int a = 1; a < mdp.n_actions(); ++a) best = std::max(best, q(pair_index(ns, s, a)));
    v(s) = best;
  }
  return v;
}

// Exact Q^pi by solving (I - gamma P Pi^pi) Q = R.
QVector evaluate_policy(const Mdp& mdp, const DeterministicPolicy& policy) {
  const int ns = mdp.n_states();
  const int n = mdp.n_pairs();
  Matrix system = Matrix::Identity(n, n);
  for (int a = 0; a < mdp.n_actions(); ++a) {
    for (int s = 0; s < ns; ++s) {
      const int row = pair_index(ns, s, a);
      for (int sn = 0; sn < ns; ++sn) {
        system(row, pair_index(ns, sn, policy.actions[sn])) -= mdp.gamma() * mdp.p(s, a, sn);
      }
    }
  }
  return system.partialPivLu().solve(expected_reward_vector(mdp));
}

}  // namespace

QVector bellman_operator(const Mdp& mdp, const QVector& q) {
  const int ns = mdp.n_states();
  const Vector v = state_values(mdp, q);
  QVector out(mdp.n_pairs());
  for (int a = 0; a < mdp.n_actions(); ++a) {
    for (int s = 0; s < ns; ++s) {
      double acc = 0.0;
      for (int sn = 0; sn < ns; ++sn) {
        acc += mdp.p(s, a, sn) * (mdp.r(s, a, sn) + mdp.gamma() * v(sn));
      }
      out(pair_index(ns, s, a)) = acc;
    }
  }
  return out;
}

double bellman_residual(const Mdp& mdp, const QVector& q) {
  return (bellman_operator(mdp, q) - q).lpNorm<Eigen::Infinity>();
}

QVector optimal_q(const Mdp& mdp, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("optimal_q: tol must be positive");
  const double gamma = mdp.gamma();
  const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : 0.0;
  constexpr long kMaxIter = 10'000'000;

  QVector q = QVector::Zero(mdp.n_pairs());
  bool converged = false;
  for (long it = 0; it < kMaxIter; ++it) {
    QVector next = bellman_operator(mdp, q);
    const double change = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    if (change <= stop) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("optimal_q: iteration cap reached");

  const DeterministicPolicy policy = greedy_policy(q, mdp.n_states());
  QVector polished = evaluate_policy(mdp, policy);
  if (polished.allFinite() && greedy_policy(polished, mdp.n_states()) == policy &&
      bellman_residual(mdp, polished) < bellman_residual(mdp, q)) {
    return polished;
  }
  return q;
}

DeterministicPolicy greedy_policy(const QVector& q, int n_states) {
  const auto na = static_cast<int>(q.size() / n_states);
  DeterministicPolicy policy;
  policy.actions.resize(n_states);
  for (int s = 0; s < n_states; ++s) {
    int best = 0;
    for (int a = 1; a < na; ++a) {
      if (q(pair_index(n_states, s, a)) > q(pair_index(n_states, s, best))) best = a;
    }
    policy.actions[s] = best;
  }
  return policy;
}

double q_max_bound(const Mdp& mdp, const QVector& q0) {
  return std::max(mdp.r_max(), q0.maxCoeff()) / (1.0 - mdp.gamma());
}

RandomInstance random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("random_mdp: dimensions must be positive");
  }
  Rng rng = Rng::stream(seed, 0, StreamPurpose::kGenerator);
  const auto size = static_cast<std::size_t>(n_states) * n_actions * n_states;
  std::vector<double> transition(size);
  std::vector<double> reward(size);

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const std::size_t base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
      double total = 0.0;
      for (int sn = 0; sn < n_states; ++sn) {
        // 1 - u lies in (0, 1], so every entry is strictly positive.
        transition[base + sn] = 1.0 - rng.uniform();
        total += transition[base + sn];
      }
      for (int sn = 0; sn < n_states; ++sn) transition[base + sn] /= total;
    }
  }
  for (double& r : reward) r = rng.uniform(-1.0, 1.0);

  SamplingModel sampling;
  sampling.state_dist.resize(n_states);
  for (int s = 0; s < n_states; ++s) sampling.state_dist(s) = rng.uniform(0.5, 1.5);
  sampling.state_dist /= sampling.state_dist.sum();
  sampling.behavior.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) sampling.behavior(s, a) = rng.uniform(0.5, 1.5);
    sampling.behavior.row(s) /= sampling.behavior.row(s).sum();
  }
  return {Mdp(n_states, n_actions, std::move(transition), std::move(reward), gamma),
          std::move(sampling)};
}

Vector stationary_distribution(const Mdp& mdp, const Matrix& behavior, double tol,
                               long max_iter) {
  const int ns = mdp.n_states();
  Matrix chain = Matrix::Zero(ns, ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      for (int sn = 0; sn < ns; ++sn) chain(s, sn) += behavior(s, a) * mdp.p(s, a, sn);
    }
  }
  const Matrix lazy = 0.5 * (Matrix::Identity(ns, ns) + chain);

  Eigen::RowVectorXd p = Eigen::RowVectorXd::Constant(ns, 1.0 / ns);
  for (long it = 0; it < max_iter; ++it) {
    if ((p * chain - p).lpNorm<1>() <= tol) return p.transpose();
    p = p * lazy;
    p /= p.sum();
  }
  throw std::runtime_error("stationary_distribution: no convergence (chain may not be ergodic)");
}

std::uint64_t policy_count(int n_states, int n_actions) {
  std::uint64_t count = 1;
  for (int s = 0; s < n_states; ++s) {
    count *= static_cast<std::uint64_t>(n_actions);
    if (count > kMaxPolicyCount) {
      throw std::overflow_error("policy_count: |A|^|S| exceeds the enumeration cap");
    }
  }
  return count;
}

std::uint64_t policy_index(const DeterministicPolicy& policy, int n_actions) {
  std::uint64_t index = 0;
  for (int a : policy.actions) {
    if (a < 0 || a >= n_actions) throw std::invalid_argument("policy_index: action out of range");
    if (index > (std::numeric_limits<std::uint64_t>::max() - a) / n_actions) {
      throw std::overflow_error("policy_index: index overflow");
    }
    index = index * n_actions + a;
  }
  return index;
}

DeterministicPolicy policy_from_index(std::uint64_t index, int n_states, int n_actions) {
  DeterministicPolicy policy;
  policy.actions.assign(n_states, 0);
  for (int s = n_states - 1; s >= 0; --s) {
    policy.actions[s] = static_cast<int>(index % n_actions);
    index /= n_actions;
  }
  if (index != 0) throw std::out_of_range("policy_from_index: index beyond |Theta|");
  return policy;
}

bool next_policy(DeterministicPolicy& policy, int n_actions) {
  for (int s = static_cast<int>(policy.actions.size()) - 1; s >= 0; --s) {
    if (++policy.actions[s] < n_actions) return true;
    policy.actions[s] = 0;
  }
  return false;
}

std::vector<DeterministicPolicy> enumerate_policies(int n_states, int n_actions) {
  std::vector<DeterministicPolicy> all;
  all.reserve(policy_count(n_states, n_actions));
  DeterministicPolicy policy{std::vector<int>(n_states, 0)};
  do {
    all.push_back(policy);
  } while (next_policy(policy, n_actions));
  return all;
}

}  // namespace switchq
