#include "switchq/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace switchq {

namespace {

void append_cdf(std::vector<double>& out, std::span<const double> weights) {
  double acc = 0.0;
  const std::size_t start = out.size();
  for (double w : weights) {
    acc += w;
    out.push_back(acc);
  }
  // Everything from the last positive weight onwards is pinned to 1 so that
  // rounding in the partial sums never selects a zero-probability tail.
  std::size_t last = start + weights.size();
  while (last > start && weights[last - 1 - start] <= 0.0) --last;
  if (last > start) {
    for (std::size_t i = last - 1; i < out.size(); ++i) out[i] = 1.0;
  }
}

}  // namespace

Sampler::Sampler(const Mdp& mdp, const SamplingModel& sampling)
    : n_states_(mdp.n_states()), n_actions_(mdp.n_actions()), reward_(mdp.reward()) {
  const auto& p = sampling.state_dist;
  append_cdf(state_cdf_, {p.data(), static_cast<std::size_t>(p.size())});
  for (int s = 0; s < n_states_; ++s) {
    std::vector<double> row(n_actions_);
    for (int a = 0; a < n_actions_; ++a) row[a] = sampling.behavior(s, a);
    append_cdf(behavior_cdf_, row);
    for (int a = 0; a < n_actions_; ++a) append_cdf(transition_cdf_, mdp.next_state_row(s, a));
  }
}

Sample Sampler::draw(Rng& rng) const {
  Sample out;
  const auto ns = static_cast<std::size_t>(n_states_);
  const auto na = static_cast<std::size_t>(n_actions_);
  out.s = rng.categorical(state_cdf_);
  out.a = rng.categorical(std::span(behavior_cdf_).subspan(out.s * na, na));
  const std::size_t base = (out.s * na + out.a) * ns;
  out.s_next = rng.categorical(std::span(transition_cdf_).subspan(base, ns));
  out.r = reward_[base + out.s_next];
  return out;
}

Sample sample_transition(const Mdp& mdp, const SamplingModel& sampling, Rng& rng) {
  return Sampler(mdp, sampling).draw(rng);
}

namespace {

double max_action_value(const QVector& q, int n_states, int n_actions, int s) {
  double best = q(s);
  for (int a = 1; a < n_actions; ++a) best = std::max(best, q(pair_index(n_states, s, a)));
  return best;
}

}  // namespace

double td_error(const Mdp& mdp, const QVector& q, const Sample& sample) {
  const int ns = mdp.n_states();
  return sample.r + mdp.gamma() * max_action_value(q, ns, mdp.n_actions(), sample.s_next) -
         q(pair_index(ns, sample.s, sample.a));
}

QVector q_update(const Mdp& mdp, const QVector& q, const Sample& sample, double alpha) {
  QVector next = q;
  next(pair_index(mdp.n_states(), sample.s, sample.a)) += alpha * td_error(mdp, q, sample);
  return next;
}

SwitchingSystem::SwitchingSystem(const Mdp& mdp, const SamplingModel& sampling, double alpha,
                                 QVector q_star)
    : n_states_(mdp.n_states()),
      n_actions_(mdp.n_actions()),
      gamma_(mdp.gamma()),
      alpha_(alpha),
      occ_(occupation_measure(sampling)),
      stacked_(build_stacked(mdp)),
      reward_(expected_reward_vector(mdp)),
      q_star_(std::move(q_star)),
      pi_star_(greedy_policy(q_star_, mdp.n_states())) {
  rho_ = switchq::rho(alpha, occ_.d_min, gamma_);
  if (q_star_.size() != mdp.n_pairs()) {
    throw std::invalid_argument("SwitchingSystem: Q* has the wrong length");
  }
}

Vector SwitchingSystem::gather(const DeterministicPolicy& policy, const Vector& x) const {
  Vector y(n_states_);
  for (int s = 0; s < n_states_; ++s) y(s) = x(pair_index(n_states_, s, policy.actions[s]));
  return y;
}

Vector SwitchingSystem::drift(const QVector& q) const {
  const Vector next_values = stacked_ * gather(greedy_policy(q, n_states_), q);
  return occ_.d.cwiseProduct(reward_ + gamma_ * next_values - q);
}

Vector SwitchingSystem::noise(const QVector& q, const Sample& sample) const {
  Vector w = -drift(q);
  const double delta = sample.r +
                       gamma_ * max_action_value(q, n_states_, n_actions_, sample.s_next) -
                       q(pair_index(n_states_, sample.s, sample.a));
  w(pair_index(n_states_, sample.s, sample.a)) += delta;
  return w;
}

Vector SwitchingSystem::apply_A(const DeterministicPolicy& policy, const Vector& x) const {
  const Vector px = stacked_ * gather(policy, x);
  return x + alpha_ * occ_.d.cwiseProduct(gamma_ * px - x);
}

Vector SwitchingSystem::apply_B(const DeterministicPolicy& policy, const Vector& x) const {
  const Vector diff = gather(policy, x) - gather(pi_star_, x);
  return (alpha_ * gamma_) * occ_.d.cwiseProduct(stacked_ * diff);
}

Vector SwitchingSystem::affine_term(const QVector& q) const {
  return apply_B(greedy_policy(q, n_states_), q_star_);
}

QVector SwitchingSystem::matrix_step(const QVector& q, const Sample& sample) const {
  return q + alpha_ * (drift(q) + noise(q, sample));
}

QVector SwitchingSystem::switching_step(const QVector& q, const Sample& sample) const {
  const DeterministicPolicy pi = greedy_policy(q, n_states_);
  return q_star_ + apply_A(pi, q - q_star_) + apply_B(pi, q_star_) + alpha_ * noise(q, sample);
}

namespace {

std::string violation_message(long step, int index, double amount, long trial) {
  std::ostringstream os;
  os.precision(6);
  os << "sandwich ordering violated";
  if (trial >= 0) os << " in trial " << trial;
  os << " at step " << step << ", component " << index << " (by " << amount << ")";
  return os.str();
}

}  // namespace

SandwichViolation::SandwichViolation(long step, int index, double amount, long trial)
    : std::runtime_error(violation_message(step, index, amount, trial)),
      step_(step),
      index_(index),
      amount_(amount),
      trial_(trial) {}

CoupledState initial_coupled_state(const QVector& q0) { return {q0, q0, q0, 0}; }

SandwichGap sandwich_gap(const CoupledState& state, const QVector& q_star) {
  SandwichGap gap;
  for (Eigen::Index i = 0; i < state.q.size(); ++i) {
    const double err = state.q(i) - q_star(i);
    const double below = (state.q_lower(i) - q_star(i)) - err;
    const double above = err - (state.q_upper(i) - q_star(i));
    const double worst = std::max(below, above);
    if (worst > gap.amount) {
      gap.amount = worst;
      gap.index = static_cast<int>(i);
    }
  }
  return gap;
}

CoupledState step_coupled(const CoupledState& state, const Sample& sample,
                          const SwitchingSystem& system, double tol,
                          StepDiagnostics* diagnostics) {
  const QVector& q_star = system.q_star();
  const double alpha = system.alpha();
  const DeterministicPolicy pi = greedy_policy(state.q, system.n_states());
  const Vector scaled_noise = alpha * system.noise(state.q, sample);

  CoupledState next;
  next.step = state.step + 1;
  next.q = state.q;
  const int idx = pair_index(system.n_states(), sample.s, sample.a);
  const double delta =
      sample.r +
      system.gamma() * max_action_value(state.q, system.n_states(), system.n_actions(),
                                        sample.s_next) -
      state.q(idx);
  next.q(idx) += alpha * delta;

  const Vector lower_err = state.q_lower - q_star;
  const Vector upper_err = state.q_upper - q_star;
  const Vector next_lower_err = system.apply_A(system.optimal_policy(), lower_err) + scaled_noise;
  const Vector next_upper_err = system.apply_A(pi, upper_err) + scaled_noise;
  next.q_lower = q_star + next_lower_err;
  next.q_upper = q_star + next_upper_err;

  if (diagnostics != nullptr) {
    const Vector predicted =
        system.apply_A(pi, upper_err - lower_err) + system.apply_B(pi, lower_err);
    diagnostics->error_identity_gap =
        (predicted - (next.q_upper - next.q_lower)).lpNorm<Eigen::Infinity>();
  }

  const SandwichGap gap = sandwich_gap(next, q_star);
  if (gap.amount > tol) throw SandwichViolation(next.step, gap.index, gap.amount);
  return next;
}

Vector error_system_step(const QVector& q_upper, const QVector& q_lower, const QVector& q,
                         const SwitchingSystem& system) {
  const DeterministicPolicy pi = greedy_policy(q, system.n_states());
  return system.apply_A(pi, q_upper - q_lower) + system.apply_B(pi, q_lower - system.q_star());
}

namespace {

// Calls visit(weight, pair index, delta) for every (s, a, s') with positive weight.
template <typename Visit>
void for_each_transition(const Mdp& mdp, const SamplingModel& sampling, const QVector& q,
                         Visit&& visit) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      const double d = sampling.state_dist(s) * sampling.behavior(s, a);
      for (int sn = 0; sn < ns; ++sn) {
        const double weight = d * mdp.p(s, a, sn);
        if (weight == 0.0) continue;
        const double delta = mdp.r(s, a, sn) + mdp.gamma() * max_action_value(q, ns, na, sn) -
                             q(pair_index(ns, s, a));
        visit(weight, pair_index(ns, s, a), delta);
      }
    }
  }
}

Vector enumeration_drift(const Mdp& mdp, const SamplingModel& sampling, const QVector& q) {
  Vector mean = Vector::Zero(mdp.n_pairs());
  for_each_transition(mdp, sampling, q,
                      [&](double weight, int idx, double delta) { mean(idx) += weight * delta; });
  return mean;
}

}  // namespace

Vector expected_noise(const Mdp& mdp, const SamplingModel& sampling, const QVector& q) {
  // E[e delta] is computed by enumeration; the drift is evaluated in matrix
  // form, so a zero result ties the two representations together.
  const OccupationMeasure occ = occupation_measure(sampling);
  const Matrix pi = build_pi(greedy_policy(q, mdp.n_states()), mdp.n_states(), mdp.n_actions());
  const Vector drift = occ.d.cwiseProduct(expected_reward_vector(mdp) +
                                          mdp.gamma() * (build_stacked(mdp) * (pi * q)) - q);
  return enumeration_drift(mdp, sampling, q) - drift;
}

double noise_second_moment(const Mdp& mdp, const SamplingModel& sampling, const QVector& q) {
  return noise_covariance(mdp, sampling, q).trace();
}

Matrix noise_covariance(const Mdp& mdp, const SamplingModel& sampling, const QVector& q) {
  const Vector mean = enumeration_drift(mdp, sampling, q);
  const int n = mdp.n_pairs();
  Matrix cov = Matrix::Zero(n, n);
  for_each_transition(mdp, sampling, q, [&](double weight, int idx, double delta) {
    Vector w = -mean;
    w(idx) += delta;
    cov.noalias() += weight * (w * w.transpose());
  });
  return cov;
}

std::vector<double> simulate_deterministic_switching(const Mdp& mdp, const OccupationMeasure& occ,
                                                     double alpha,
                                                     std::span<const DeterministicPolicy> sequence,
                                                     const Vector& x0) {
  const Matrix stacked = build_stacked(mdp);
  const int ns = mdp.n_states();
  (void)rho(alpha, occ.d_min, mdp.gamma());

  std::vector<double> norms;
  norms.reserve(sequence.size() + 1);
  Vector x = x0;
  norms.push_back(x.lpNorm<Eigen::Infinity>());
  Vector gathered(ns);
  for (const auto& policy : sequence) {
    for (int s = 0; s < ns; ++s) gathered(s) = x(pair_index(ns, s, policy.actions[s]));
    x += alpha * occ.d.cwiseProduct(mdp.gamma() * (stacked * gathered) - x);
    norms.push_back(x.lpNorm<Eigen::Infinity>());
  }
  return norms;
}

Matrix autocorrelation_step(const Matrix& x, const Matrix& a, const Matrix& w, double alpha) {
  return a * x * a.transpose() + (alpha * alpha) * w;
}

Matrix empirical_autocorrelation(std::span<const Vector> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_autocorrelation: no samples");
  const auto n = samples.front().size();
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& x : samples) acc.noalias() += x * x.transpose();
  return acc / static_cast<double>(samples.size());
}

}  // namespace switchq
