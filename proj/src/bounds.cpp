#include "switchq/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace switchq {

void BoundInputs::validate() const {
  if (!(n >= 1.0)) throw std::invalid_argument("bounds: n must be at least 1");
  if (!(d_min > 0.0 && d_min <= 1.0)) throw std::invalid_argument("bounds: d_min must lie in (0, 1]");
  if (!(d_max >= d_min && d_max <= 1.0)) {
    throw std::invalid_argument("bounds: d_max must lie in [d_min, 1]");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("bounds: gamma must lie in [0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bounds: alpha must lie in (0, 1)");
  if (q0_err_l2 && !(*q0_err_l2 >= 0.0)) throw std::invalid_argument("bounds: q0_err_l2 < 0");
  if (q0_err_inf && !(*q0_err_inf >= 0.0)) throw std::invalid_argument("bounds: q0_err_inf < 0");
}

double BoundInputs::rho() const { return 1.0 - alpha * d_min * (1.0 - gamma); }

double BoundInputs::initial_error_l2() const {
  return q0_err_l2.value_or(std::sqrt(n) * 2.0 / (1.0 - gamma));
}

namespace {

// ln(rho) and rho^x through log1p, so that rho = 1 - u keeps its accuracy
// when u = alpha d_min (1 - gamma) is tiny.
double log_rho_raw(const BoundInputs& in) {
  return std::log1p(-in.alpha * in.d_min * (1.0 - in.gamma));
}

double rho_pow(const BoundInputs& in, double x) { return std::exp(x * log_rho_raw(in)); }

}  // namespace

double w_max(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("w_max: gamma must lie in [0, 1)");
  return 9.0 / ((1.0 - gamma) * (1.0 - gamma));
}

double trace_bound(double k, const BoundInputs& in) {
  in.validate();
  const double x0 = in.initial_error_l2();
  const double n2 = in.n * in.n;
  return 9.0 * n2 * in.alpha / (in.d_min * std::pow(1.0 - in.gamma, 3)) +
         x0 * x0 * n2 * rho_pow(in, 2.0 * k);
}

double theorem1_bound(double k, const BoundInputs& in) {
  in.validate();
  return 3.0 * std::sqrt(in.alpha) * in.n / (std::sqrt(in.d_min) * std::pow(1.0 - in.gamma, 1.5)) +
         in.n * in.initial_error_l2() * rho_pow(in, k);
}

namespace {

double leading_term(const BoundInputs& in, LeadingTerm leading) {
  const double base = 9.0 * in.d_max * in.n * std::sqrt(in.alpha) /
                      (std::pow(in.d_min, 1.5) * std::pow(1.0 - in.gamma, 2.5));
  return leading == LeadingTerm::kGammaWeighted ? in.gamma * base : base;
}

double transient_term(double k, const BoundInputs& in) {
  return 2.0 * std::pow(in.n, 1.5) / (1.0 - in.gamma) * rho_pow(in, k);
}

// gamma d_max n^{2/3} / (1 - gamma), shared by every coupling term.
double coupling_scale(const BoundInputs& in) {
  return in.gamma * in.d_max * std::pow(in.n, 2.0 / 3.0) / (1.0 - in.gamma);
}

double log_rho(const BoundInputs& in) {
  const double lr = log_rho_raw(in);
  if (!(lr < 0.0)) throw std::domain_error("bounds: rho rounds to 1, ln(rho) = 0");
  return lr;
}

}  // namespace

BoundTerms theorem2_terms(double k, const BoundInputs& in, LeadingTerm leading) {
  in.validate();
  BoundTerms t;
  t.bias = leading_term(in, leading);
  t.transient = transient_term(k, in);
  t.coupling = k == 0.0 ? 0.0
                        : 4.0 * in.alpha * coupling_scale(in) * k * rho_pow(in, k - 1.0);
  return t;
}

double theorem2_bound(double k, const BoundInputs& in, LeadingTerm leading) {
  return theorem2_terms(k, in, leading).total();
}

double coupling_peak(const BoundInputs& in) {
  in.validate();
  return -2.0 / log_rho(in);
}

BoundTerms corollary_a_terms(double k, const BoundInputs& in, LeadingTerm leading) {
  in.validate();
  const double lr = log_rho(in);
  BoundTerms t;
  t.bias = leading_term(in, leading);
  t.transient = transient_term(k, in);
  t.coupling = 4.0 * in.alpha * coupling_scale(in) * (-2.0 / lr) *
               std::exp(-1.0 - lr) * rho_pow(in, k / 2.0);
  return t;
}

double corollary_bound_a(double k, const BoundInputs& in, LeadingTerm leading) {
  return corollary_a_terms(k, in, leading).total();
}

BoundTerms corollary_b_terms(double k, const BoundInputs& in, LeadingTerm leading) {
  in.validate();
  BoundTerms t;
  t.bias = leading_term(in, leading);
  t.transient = transient_term(k, in);
  t.coupling = 8.0 * coupling_scale(in) / (in.d_min * (1.0 - in.gamma)) *
               rho_pow(in, k / 2.0 - 1.0);
  return t;
}

double corollary_bound_b(double k, const BoundInputs& in, LeadingTerm leading) {
  return corollary_b_terms(k, in, leading).total();
}

double abstract_bound(double k, const BoundInputs& in) {
  in.validate();
  return leading_term(in, LeadingTerm::kPlain) + transient_term(k, in) +
         4.0 * coupling_scale(in) / (in.d_min * (1.0 - in.gamma)) *
             rho_pow(in, k / 2.0 - 1.0);
}

ProbabilityBound markov_probability_bound(double epsilon, double k, const BoundInputs& in) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("markov_probability_bound: epsilon must be positive");
  const double rhs = corollary_b_terms(k, in, LeadingTerm::kGammaWeighted).total();
  ProbabilityBound out;
  out.raw = 1.0 - rhs / epsilon;
  out.clamped = std::clamp(out.raw, 0.0, 1.0);
  return out;
}

SampleComplexity sample_complexity(double epsilon, double n, double d_min, double d_max,
                                   double gamma) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("sample_complexity: epsilon must be positive");
  if (gamma == 0.0) {
    throw std::invalid_argument(
        "sample_complexity: gamma = 0 makes the step size singular (gamma^2 in the denominator)");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("sample_complexity: gamma must lie in (0, 1)");
  }
  if (!(n >= 1.0)) throw std::invalid_argument("sample_complexity: n must be at least 1");
  if (!(d_min > 0.0 && d_min <= 1.0 && d_max >= d_min && d_max <= 1.0)) {
    throw std::invalid_argument("sample_complexity: need 0 < d_min <= d_max <= 1");
  }

  SampleComplexity out;
  const double one_minus = 1.0 - gamma;
  out.alpha = epsilon * epsilon * std::pow(d_min, 3) * std::pow(one_minus, 5) /
              (729.0 * gamma * gamma * d_max * d_max * n * n);
  if (out.alpha >= 1.0) {
    out.alpha = std::nextafter(1.0, 0.0);
    out.alpha_clamped = true;
  }
  // 1 / (1 - rho), the factor produced by ln(1/rho) >= 1 - rho.
  const double rate = 1.0 / (out.alpha * d_min * one_minus);

  const double transient_arg = 6.0 * std::pow(n, 1.5) / (epsilon * one_minus);
  const double coupling_arg =
      24.0 * gamma * d_max * std::pow(n, 2.0 / 3.0) / (epsilon * d_min * one_minus * one_minus);
  if (transient_arg > 1.0) {
    out.k_transient = rate * std::log(transient_arg);
  } else {
    out.vacuous = true;
  }
  if (coupling_arg > 1.0) {
    out.k_coupling = 2.0 * rate * std::log(coupling_arg);
  } else {
    out.vacuous = true;
  }

  const double k = std::ceil(std::max(out.k_transient, out.k_coupling));
  if (!(k < 0x1.0p62)) throw std::overflow_error("sample_complexity: k_min does not fit in 62 bits");
  out.k_min = static_cast<std::uint64_t>(k);
  return out;
}

void write_bound_curves_csv(std::ostream& os, std::span<const long> checkpoints,
                            const BoundInputs& in, double epsilon) {
  os << "k,theorem1,theorem2,corollary_a,corollary_b,abstract,markov_prob\n";
  char buf[256];
  for (long k : checkpoints) {
    const auto kd = static_cast<double>(k);
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k,
                  theorem1_bound(kd, in), theorem2_bound(kd, in), corollary_bound_a(kd, in),
                  corollary_bound_b(kd, in), abstract_bound(kd, in),
                  markov_probability_bound(epsilon, kd, in).clamped);
    os << buf;
  }
}

}  // namespace switchq
