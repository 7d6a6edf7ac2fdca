#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>

namespace switchq {

/**
 * Problem constants entering the finite-time error bounds.
 *
 * n is |S x A|. When q0_err_l2 is not supplied the worst case
 * sqrt(n) * 2 / (1 - gamma) is used, which holds whenever ||Q_0||_inf <= 1
 * and R_max <= 1.
 */
struct BoundInputs {
  double n = 1.0;
  double d_min = 1.0;
  double d_max = 1.0;
  double gamma = 0.0;
  double alpha = 0.5;
  std::optional<double> q0_err_l2;
  std::optional<double> q0_err_inf;

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;
  double rho() const;
  double initial_error_l2() const;
};

/// Which leading constant to use for the constant-step-size term.
enum class LeadingTerm {
  kPlain,         // 9 d_max n alpha^{1/2} / (d_min^{3/2} (1-gamma)^{5/2})
  kGammaWeighted,  // same with an extra factor gamma
};

/// The three additive pieces of a final-iterate bound.
struct BoundTerms {
  double bias = 0.0;       // constant-step-size floor
  double transient = 0.0;  // rho^k term
  double coupling = 0.0;   // upper/lower gap term

  double total() const { return bias + transient + coupling; }
};

/// 9 / (1 - gamma)^2. Throws for gamma outside [0, 1).
double w_max(double gamma);

/// 9 n^2 alpha / (d_min (1-gamma)^3) + ||x_0||_2^2 n^2 rho^{2k}
double trace_bound(double k, const BoundInputs& in);

/// Lower comparison system: E||Q_k^L - Q*||_2.
double theorem1_bound(double k, const BoundInputs& in);

BoundTerms theorem2_terms(double k, const BoundInputs& in,
                          LeadingTerm leading = LeadingTerm::kPlain);
/// E||Q_k - Q*||_inf with the k rho^{k-1} coupling term.
double theorem2_bound(double k, const BoundInputs& in,
                      LeadingTerm leading = LeadingTerm::kPlain);

BoundTerms corollary_a_terms(double k, const BoundInputs& in,
                             LeadingTerm leading = LeadingTerm::kPlain);
/// k rho^{k-1} replaced by its maximum over k times rho^{k/2}.
double corollary_bound_a(double k, const BoundInputs& in,
                         LeadingTerm leading = LeadingTerm::kPlain);

BoundTerms corollary_b_terms(double k, const BoundInputs& in,
                             LeadingTerm leading = LeadingTerm::kPlain);
/// Coupling term 8 gamma d_max n^{2/3} / (d_min (1-gamma)^2) rho^{k/2-1}.
double corollary_bound_b(double k, const BoundInputs& in,
                         LeadingTerm leading = LeadingTerm::kPlain);

/// Headline variant: coupling coefficient 4 instead of 8, no alpha factor.
double abstract_bound(double k, const BoundInputs& in);

/// k at which k rho^{k/2} peaks, -2 / ln(rho).
double coupling_peak(const BoundInputs& in);

struct ProbabilityBound {
  double raw = 0.0;
  double clamped = 0.0;
};

/// Markov-inequality lower bound on P[||Q_k - Q*||_inf < epsilon].
ProbabilityBound markov_probability_bound(double epsilon, double k, const BoundInputs& in);

struct SampleComplexity {
  double alpha = 0.0;
  bool alpha_clamped = false;
  /// Sufficient k for the transient and coupling terms separately.
  double k_transient = 0.0;
  double k_coupling = 0.0;
  std::uint64_t k_min = 0;
  /// Set when a log argument is <= 1, so that term needs no iterations.
  bool vacuous = false;
};

/**
 * Step size and iteration count making each term of the coupled bound at
 * most epsilon / 3. Rejects gamma outside (0, 1) and epsilon <= 0.
 */
SampleComplexity sample_complexity(double epsilon, double n, double d_min, double d_max,
                                   double gamma);

/// CSV with columns k, theorem1, theorem2, corollary_a, corollary_b, abstract, markov_prob.
void write_bound_curves_csv(std::ostream& os, std::span<const long> checkpoints,
                            const BoundInputs& in, double epsilon);

}  // namespace switchq
