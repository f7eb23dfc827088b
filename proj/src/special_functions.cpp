#include "sepq/special_functions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sepq {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxTerms = 20000;

// Series for G(a,b), reliable for a < b + 1.
double lower_series(double a, double b) {
  double ap = b;
  double sum = 1.0 / b;
  double del = sum;
  for (int n = 0; n < kMaxTerms; ++n) {
    ap += 1.0;
    del *= a / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-a + b * std::log(a) - log_gamma(b));
}

// Continued fraction for Q(a,b) via modified Lentz, reliable for a >= b + 1.
double upper_cf(double a, double b) {
  const double tiny = 1e-300;
  double den = a + 1.0 - b;
  double c = 1.0 / tiny;
  double d = 1.0 / den;
  double h = d;
  for (int i = 1; i <= kMaxTerms; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - b);
    den += 2.0;
    d = an * d + den;
    if (std::abs(d) < tiny) d = tiny;
    c = den + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= kEps) break;
  }
  return std::exp(-a + b * std::log(a) - log_gamma(b)) * h;
}

// d/da G(a,b) = a^(b-1) e^(-a) / Gamma(b)
double gamma_density(double a, double b) {
  return std::exp((b - 1.0) * std::log(a) - a - log_gamma(b));
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: x must be positive");
  return std::lgamma(x);
}

double reg_lower_inc_gamma(double a, double b) {
  if (!(a >= 0.0)) throw std::domain_error("reg_lower_inc_gamma: a must be nonnegative");
  if (!(b > 0.0)) throw std::domain_error("reg_lower_inc_gamma: b must be positive");
  if (a == 0.0) return 0.0;
  if (std::isinf(a)) return 1.0;
  return a < b + 1.0 ? lower_series(a, b) : 1.0 - upper_cf(a, b);
}

double reg_upper_inc_gamma(double a, double b) {
  if (!(a >= 0.0)) throw std::domain_error("reg_upper_inc_gamma: a must be nonnegative");
  if (!(b > 0.0)) throw std::domain_error("reg_upper_inc_gamma: b must be positive");
  if (a == 0.0) return 1.0;
  if (std::isinf(a)) return 0.0;
  return a < b + 1.0 ? 1.0 - lower_series(a, b) : upper_cf(a, b);
}

double inv_reg_lower_inc_gamma(double q, double b) {
  if (!(b > 0.0)) throw std::domain_error("inv_reg_lower_inc_gamma: b must be positive");
  if (!(q >= 0.0 && q < 1.0))
    throw std::domain_error("inv_reg_lower_inc_gamma: q must lie in [0, 1)");
  if (q == 0.0) return 0.0;

  // Initial guess: Wilson-Hilferty for b > 1, two-piece approximation otherwise.
  double x;
  if (b > 1.0) {
    const double pp = q < 0.5 ? q : 1.0 - q;
    const double t = std::sqrt(-2.0 * std::log(pp));
    double z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
    if (q > 0.5) z = -z;
    const double u = 1.0 - 1.0 / (9.0 * b) + z / (3.0 * std::sqrt(b));
    x = b * u * u * u;
    x = std::max(x, 1e-3);
  } else {
    const double t = 1.0 - b * (0.253 + 0.12 * b);
    x = q < t ? std::pow(q / t, 1.0 / b) : 1.0 - std::log1p(-(q - t) / (1.0 - t));
  }
  if (!std::isfinite(x) || x <= 0.0) x = 1.0;

  // Bracket [lo, hi] with G(lo) <= q <= G(hi); grow hi if the guess is short.
  double lo = 0.0;
  double hi = std::max(x, 1.0);
  for (int i = 0; i < 400 && reg_lower_inc_gamma(hi, b) < q; ++i) hi *= 2.0;

  x = std::min(std::max(x, 1e-300), hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double g = reg_lower_inc_gamma(x, b) - q;
    if (std::abs(g) <= 1e-13) return x;
    if (g > 0.0) hi = x; else lo = x;
    const double dens = gamma_density(x, b);
    double xn = (dens > 0.0 && std::isfinite(dens)) ? x - g / dens
                                                    : std::numeric_limits<double>::quiet_NaN();
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (xn == x || hi - lo <= 4.0 * kEps * x) return x;
    x = xn;
  }
  return x;
}

}  // namespace sepq
