#pragma once

// Test-only reference implementations. They work on nested std::vector and
// use no code from the library beyond reading an Mdp through its accessors.

#include "switchq/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Table = std::vector<std::vector<double>>;          // [s][a]
using Tensor = std::vector<std::vector<std::vector<double>>>;  // [s][a][s']

struct Model {
  int ns = 0;
  int na = 0;
  double gamma = 0.0;
  Tensor P;
  Tensor R;
};

inline Model from(const switchq::Mdp& mdp) {
  Model m;
  m.ns = mdp.n_states();
  m.na = mdp.n_actions();
  m.gamma = mdp.gamma();
  m.P.assign(m.ns, Table(m.na, std::vector<double>(m.ns)));
  m.R = m.P;
  for (int s = 0; s < m.ns; ++s)
    for (int a = 0; a < m.na; ++a)
      for (int t = 0; t < m.ns; ++t) {
        m.P[s][a][t] = mdp.p(s, a, t);
        m.R[s][a][t] = mdp.r(s, a, t);
      }
  return m;
}

inline double max_row(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

// In-place (Gauss-Seidel) value iteration on Q until the sweep changes
// nothing by more than tol.
inline Table value_iteration(const Model& m, double tol = 1e-15, int max_sweeps = 1'000'000) {
  Table q(m.ns, std::vector<double>(m.na, 0.0));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (int s = 0; s < m.ns; ++s) {
      for (int a = 0; a < m.na; ++a) {
        double v = 0.0;
        for (int t = 0; t < m.ns; ++t) v += m.P[s][a][t] * (m.R[s][a][t] + m.gamma * max_row(q[t]));
        change = std::max(change, std::abs(v - q[s][a]));
        q[s][a] = v;
      }
    }
    if (change <= tol) break;
  }
  return q;
}

// Q^pi by a direct linear solve of V = r_pi + gamma P_pi V.
inline Table policy_q(const Model& m, const std::vector<int>& pi) {
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(m.ns, m.ns);
  Eigen::VectorXd rhs(m.ns);
  for (int s = 0; s < m.ns; ++s) {
    rhs(s) = 0.0;
    for (int t = 0; t < m.ns; ++t) {
      lhs(s, t) -= m.gamma * m.P[s][pi[s]][t];
      rhs(s) += m.P[s][pi[s]][t] * m.R[s][pi[s]][t];
    }
  }
  const Eigen::VectorXd v = lhs.fullPivLu().solve(rhs);
  Table q(m.ns, std::vector<double>(m.na));
  for (int s = 0; s < m.ns; ++s)
    for (int a = 0; a < m.na; ++a) {
      double x = 0.0;
      for (int t = 0; t < m.ns; ++t) x += m.P[s][a][t] * (m.R[s][a][t] + m.gamma * v(t));
      q[s][a] = x;
    }
  return q;
}

// Every deterministic policy, state 0 varying slowest.
inline std::vector<std::vector<int>> all_policies(int ns, int na) {
  std::vector<std::vector<int>> out;
  std::vector<int> pi(ns, 0);
  while (true) {
    out.push_back(pi);
    int s = ns - 1;
    while (s >= 0 && ++pi[s] == na) pi[s--] = 0;
    if (s < 0) break;
  }
  return out;
}

// Q* as the elementwise maximum of Q^pi over all deterministic policies,
// with the maximizing policy (the policy whose value dominates everywhere).
struct BruteForce {
  Table q;
  std::vector<int> best_policy;
};

inline BruteForce brute_force(const Model& m) {
  BruteForce out;
  out.q.assign(m.ns, std::vector<double>(m.na, -1e300));
  double best_sum = -1e300;
  for (const auto& pi : all_policies(m.ns, m.na)) {
    const Table q = policy_q(m, pi);
    double sum = 0.0;
    for (int s = 0; s < m.ns; ++s) {
      sum += q[s][pi[s]];
      for (int a = 0; a < m.na; ++a) out.q[s][a] = std::max(out.q[s][a], q[s][a]);
    }
    if (sum > best_sum) {
      best_sum = sum;
      out.best_policy = pi;
    }
  }
  return out;
}

// Stationary distribution of M(s,t) = sum_a beta(a|s) P(s,a,t) from the
// linear system p (M - I) = 0, sum p = 1 (least squares on the stacked system).
inline std::vector<double> stationary(const Model& m, const Table& beta) {
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m.ns + 1, m.ns);
  for (int s = 0; s < m.ns; ++s)
    for (int t = 0; t < m.ns; ++t) {
      double x = 0.0;
      for (int a = 0; a < m.na; ++a) x += beta[s][a] * m.P[s][a][t];
      sys(t, s) = x - (s == t ? 1.0 : 0.0);
    }
  sys.row(m.ns).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.ns + 1);
  rhs(m.ns) = 1.0;
  const Eigen::VectorXd p = sys.colPivHouseholderQr().solve(rhs);
  return {p.data(), p.data() + m.ns};
}

// Bound formulas transcribed from their printed form, one expression each.
struct Params {
  double n, d_min, d_max, gamma, alpha;
};

inline double rho(const Params& p) { return 1 - p.alpha * p.d_min * (1 - p.gamma); }

inline double lower_bound(const Params& p, double x0, double k) {
  return 3 * std::sqrt(p.alpha) * p.n / std::sqrt(p.d_min) / std::pow(1 - p.gamma, 1.5) +
         p.n * x0 * std::pow(rho(p), k);
}

inline double trace(const Params& p, double x0, double k) {
  return 9 * p.n * p.n * p.alpha / p.d_min / std::pow(1 - p.gamma, 3) +
         x0 * x0 * p.n * p.n * std::pow(rho(p), 2 * k);
}

inline double first(const Params& p, bool with_gamma) {
  return (with_gamma ? 9 * p.gamma : 9.0) * p.d_max * p.n * std::sqrt(p.alpha) /
         std::pow(p.d_min, 1.5) / std::pow(1 - p.gamma, 2.5);
}

inline double second(const Params& p, double k) {
  return 2 * std::pow(p.n, 1.5) / (1 - p.gamma) * std::pow(rho(p), k);
}

inline double third_eq3(const Params& p, double k) {
  return 4 * p.alpha * p.gamma * p.d_max * std::cbrt(p.n * p.n) / (1 - p.gamma) * k *
         std::pow(rho(p), k - 1);
}

inline double third_eq4(const Params& p, double k) {
  const double l = std::log(rho(p));
  return 4 * p.alpha * p.gamma * p.d_max * std::cbrt(p.n * p.n) / (1 - p.gamma) * (-2 / l) *
         std::pow(rho(p), -1 / l - 1) * std::pow(rho(p), k / 2);
}

inline double third_eq5(const Params& p, double k) {
  return 8 * p.gamma * p.d_max * std::cbrt(p.n * p.n) / (1 - p.gamma) / (p.d_min * (1 - p.gamma)) *
         std::pow(rho(p), k / 2 - 1);
}

// Sufficient step size and iteration counts of the sample-complexity
// derivation, written in its final closed form.
struct Complexity {
  double alpha, k_transient, k_coupling;
};

inline Complexity complexity(double eps, double n, double d_min, double d_max, double gamma) {
  Complexity c;
  c.alpha = eps * eps * std::pow(d_min, 3) * std::pow(1 - gamma, 5) /
            (729 * gamma * gamma * d_max * d_max * n * n);
  c.k_transient = std::log(6 * std::pow(n, 1.5) / (eps * (1 - gamma))) * 729 * gamma * gamma *
                  d_max * d_max * n * n / (eps * eps * std::pow(d_min, 4) * std::pow(1 - gamma, 6));
  c.k_coupling = std::log(24 * gamma * d_max * std::cbrt(n * n) / (eps * d_min * (1 - gamma) * (1 - gamma))) *
                 1458 * gamma * gamma * d_max * d_max * n * n /
                 (eps * eps * std::pow(d_min, 4) * std::pow(1 - gamma, 6));
  return c;
}

}  // namespace oracle
