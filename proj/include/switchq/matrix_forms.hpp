#pragma once

#include "switchq/mdp.hpp"

#include <ostream>

namespace switchq {

/// |S x A| x |S| matrix whose row a*|S| + s is P(s, a, .).
Matrix build_stacked(const Mdp& mdp);

/// diag(d) as a dense matrix.
Matrix build_occupation_diagonal(const OccupationMeasure& occ);

/// |S| x |S x A| action transition matrix; row s is e_{pi(s)}^T (x) e_s^T.
Matrix build_pi(const DeterministicPolicy& policy, int n_states, int n_actions);

/// rho = 1 - alpha d_min (1 - gamma). Requires alpha in (0,1), d_min in (0,1],
/// gamma in [0,1); throws std::invalid_argument otherwise.
double rho(double alpha, double d_min, double gamma);

struct SubsystemA {
  Matrix a;
  double rho = 0.0;
};

/// A = I + alpha (gamma D P Pi^pi - D). Throws for alpha outside (0, 1).
SubsystemA build_A(const Mdp& mdp, const OccupationMeasure& occ, double alpha,
                   const DeterministicPolicy& policy);

/// b_Q = alpha gamma D P (Pi_Q - Pi_{Q*}) Q*. The step size is part of the
/// affine term so that the switching form reproduces the Q-learning step.
Vector build_b(const Mdp& mdp, const OccupationMeasure& occ, double alpha, const QVector& q,
               const QVector& q_star);

/// A_pi from a precomputed stacked transition matrix; no range checks.
Matrix subsystem_matrix(const Matrix& stacked, const Vector& d, double gamma, double alpha,
                        const DeterministicPolicy& policy);

/// B_Q = A_Q - A_{Q*} = alpha gamma D P (Pi_Q - Pi_{Q*})
Matrix build_B(const Mdp& mdp, const OccupationMeasure& occ, double alpha, const QVector& q,
               const QVector& q_star);

/// Subsystem matrices of the switching system at Q.
struct SubsystemMatrices {
  Matrix a;
  Vector b;
  Matrix b_matrix;
  double rho = 0.0;
};

SubsystemMatrices build_subsystem(const Mdp& mdp, const OccupationMeasure& occ, double alpha,
                                  const QVector& q, const QVector& q_star);

/// Max absolute row sum.
double inf_norm(const Matrix& m);

inline constexpr double kNonnegativeSlack = 1e-15;

bool is_nonnegative(const Matrix& m, double slack = kNonnegativeSlack);

/// Row-major CSV, 17 significant digits.
void write_matrix_csv(std::ostream& os, const Matrix& m);

}  // namespace switchq
