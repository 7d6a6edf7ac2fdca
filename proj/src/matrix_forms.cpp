#include "switchq/matrix_forms.hpp"

#include <cstdio>
#include <stdexcept>

namespace switchq {

Matrix build_stacked(const Mdp& mdp) {
  const int ns = mdp.n_states();
  Matrix p(mdp.n_pairs(), ns);
  for (int a = 0; a < mdp.n_actions(); ++a) {
    for (int s = 0; s < ns; ++s) {
      for (int sn = 0; sn < ns; ++sn) p(pair_index(ns, s, a), sn) = mdp.p(s, a, sn);
    }
  }
  return p;
}

Matrix build_occupation_diagonal(const OccupationMeasure& occ) {
  return occ.d.asDiagonal();
}

Matrix build_pi(const DeterministicPolicy& policy, int n_states, int n_actions) {
  if (static_cast<int>(policy.actions.size()) != n_states) {
    throw std::invalid_argument("build_pi: policy length differs from |S|");
  }
  Matrix pi = Matrix::Zero(n_states, n_states * n_actions);
  for (int s = 0; s < n_states; ++s) {
    const int a = policy.actions[s];
    if (a < 0 || a >= n_actions) throw std::invalid_argument("build_pi: action out of range");
    pi(s, pair_index(n_states, s, a)) = 1.0;
  }
  return pi;
}

double rho(double alpha, double d_min, double gamma) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("rho: alpha must lie in (0, 1)");
  if (!(d_min > 0.0 && d_min <= 1.0)) throw std::invalid_argument("rho: d_min must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("rho: gamma must lie in [0, 1)");
  return 1.0 - alpha * d_min * (1.0 - gamma);
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("step size alpha must lie in (0, 1)");
  }
}

// gamma D P (Pi_1 - Pi_2), the common factor of B and b.
Matrix switching_difference(const Mdp& mdp, const OccupationMeasure& occ,
                            const DeterministicPolicy& pi1, const DeterministicPolicy& pi2) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  const Matrix diff = build_pi(pi1, ns, na) - build_pi(pi2, ns, na);
  return mdp.gamma() * occ.d.asDiagonal() * (build_stacked(mdp) * diff);
}

}  // namespace

Matrix subsystem_matrix(const Matrix& stacked, const Vector& d, double gamma, double alpha,
                        const DeterministicPolicy& policy) {
  const auto n = stacked.rows();
  const auto ns = static_cast<int>(stacked.cols());
  Matrix a = Matrix::Identity(n, n);
  // I + alpha (gamma D P Pi - D); column (s', pi(s')) of P Pi carries P(i, s').
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) -= alpha * d(i);
    const double scale = alpha * gamma * d(i);
    for (int sn = 0; sn < ns; ++sn) {
      a(i, pair_index(ns, sn, policy.actions[sn])) += scale * stacked(i, sn);
    }
  }
  return a;
}

SubsystemA build_A(const Mdp& mdp, const OccupationMeasure& occ, double alpha,
                   const DeterministicPolicy& policy) {
  check_alpha(alpha);
  // Validates the policy shape.
  (void)build_pi(policy, mdp.n_states(), mdp.n_actions());
  return {subsystem_matrix(build_stacked(mdp), occ.d, mdp.gamma(), alpha, policy),
          rho(alpha, occ.d_min, mdp.gamma())};
}

Matrix build_B(const Mdp& mdp, const OccupationMeasure& occ, double alpha, const QVector& q,
               const QVector& q_star) {
  check_alpha(alpha);
  const int ns = mdp.n_states();
  return alpha * switching_difference(mdp, occ, greedy_policy(q, ns), greedy_policy(q_star, ns));
}

Vector build_b(const Mdp& mdp, const OccupationMeasure& occ, double alpha, const QVector& q,
               const QVector& q_star) {
  return build_B(mdp, occ, alpha, q, q_star) * q_star;
}

SubsystemMatrices build_subsystem(const Mdp& mdp, const OccupationMeasure& occ, double alpha,
                                  const QVector& q, const QVector& q_star) {
  SubsystemA sa = build_A(mdp, occ, alpha, greedy_policy(q, mdp.n_states()));
  Matrix bm = build_B(mdp, occ, alpha, q, q_star);
  Vector b = bm * q_star;
  return {std::move(sa.a), std::move(b), std::move(bm), sa.rho};
}

double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

bool is_nonnegative(const Matrix& m, double slack) {
  return m.size() == 0 || m.minCoeff() >= -slack;
}

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.16e", m(i, j));
      if (j > 0) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace switchq
