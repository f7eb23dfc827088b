#ifndef SEPQ_SPECIAL_FUNCTIONS_HPP
#define SEPQ_SPECIAL_FUNCTIONS_HPP

namespace sepq {

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

/// Regularized lower incomplete gamma function
///   G(a, b) = (1 / Gamma(b)) * int_0^a t^(b-1) e^(-t) dt
/// for a >= 0 and b > 0. Series expansion below the a ~ b + 1 crossover,
/// modified-Lentz continued fraction above it.
double reg_lower_inc_gamma(double a, double b);

/// Upper tail Q(a, b) = 1 - G(a, b), computed directly so deep tails keep
/// full relative precision instead of cancelling against 1.
double reg_upper_inc_gamma(double a, double b);

/// Solves G(a, b) = q for a, with 0 <= q < 1 and b > 0. Newton iterations
/// with the analytic derivative, started from a Wilson-Hilferty-style guess
/// and safeguarded by a maintained bisection bracket.
double inv_reg_lower_inc_gamma(double q, double b);

}  // namespace sepq

#endif  // SEPQ_SPECIAL_FUNCTIONS_HPP
