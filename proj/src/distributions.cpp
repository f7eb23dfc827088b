#include "sepq/distributions.hpp"

#include <cmath>
#include <stdexcept>

#include "sepq/special_functions.hpp"

namespace sepq {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::domain_error(msg);
}

// w = ((mu - y) / (2 p0 sigma K1))^kappa1 evaluated through logs; equals the
// G argument times kappa and the pdf exponent times kappa.
double sep_w_left(double y, const SEPParams& p) {
  const double arg =
      p.kappa1 * (std::log(p.mu - y) - std::log(2.0 * p.p0 * p.sigma) - p.log_k1);
  return std::exp(arg);
}

double sep_w_right(double y, const SEPParams& p) {
  const double arg =
      p.kappa2 * (std::log(y - p.mu) - std::log(2.0 * (1.0 - p.p0) * p.sigma) - p.log_k2);
  return std::exp(arg);
}

}  // namespace

QuantileLevel::QuantileLevel(double p0) : p0_(p0) {
  require(std::isfinite(p0) && p0 > 0.0 && p0 < 1.0, "quantile level must lie in (0,1)");
}

SLParams::SLParams(double mu_, double sigma_, double p0_) : mu(mu_), sigma(sigma_), p0(p0_) {
  require(std::isfinite(mu), "SLParams: mu must be finite");
  require(std::isfinite(sigma) && sigma > 0.0, "SLParams: sigma must be positive");
  require(std::isfinite(p0) && p0 > 0.0 && p0 < 1.0, "SLParams: p0 must lie in (0,1)");
}

SEPParams::SEPParams(double mu_, double sigma_, double kappa1_, double kappa2_, double p0_)
    : mu(mu_), sigma(sigma_), kappa1(kappa1_), kappa2(kappa2_), p0(p0_) {
  require(std::isfinite(mu), "SEPParams: mu must be finite");
  require(std::isfinite(sigma) && sigma > 0.0, "SEPParams: sigma must be positive");
  require(std::isfinite(kappa1) && kappa1 > 0.0, "SEPParams: kappa1 must be positive");
  require(std::isfinite(kappa2) && kappa2 > 0.0, "SEPParams: kappa2 must be positive");
  require(std::isfinite(p0) && p0 > 0.0 && p0 < 1.0, "SEPParams: p0 must lie in (0,1)");
  log_k1 = sep_log_norm_constant(kappa1);
  log_k2 = sep_log_norm_constant(kappa2);
  require(std::isfinite(log_k1) && std::isfinite(log_k2),
          "SEPParams: normalizing constants must be finite and positive");
}

double sep_log_norm_constant(double kappa) {
  require(std::isfinite(kappa) && kappa > 0.0, "sep_norm_constant: kappa must be positive");
  return -std::log(kappa) / kappa - std::log(2.0) - log_gamma(1.0 + 1.0 / kappa);
}

double sep_norm_constant(double kappa) { return std::exp(sep_log_norm_constant(kappa)); }

double sl_logpdf(double y, const SLParams& p) {
  const double c = std::log(2.0 * p.p0 * (1.0 - p.p0) / p.sigma);
  if (y <= p.mu) return c + 2.0 * (y - p.mu) * (1.0 - p.p0) / p.sigma;
  return c - 2.0 * p.p0 * (y - p.mu) / p.sigma;
}

double sl_cdf(double y, const SLParams& p) {
  if (y <= p.mu) return p.p0 * std::exp(2.0 * (y - p.mu) * (1.0 - p.p0) / p.sigma);
  return 1.0 - (1.0 - p.p0) * std::exp(-2.0 * p.p0 * (y - p.mu) / p.sigma);
}

double sl_logcdf(double y, const SLParams& p) {
  if (y <= p.mu) return std::log(p.p0) + 2.0 * (y - p.mu) * (1.0 - p.p0) / p.sigma;
  return std::log1p(-(1.0 - p.p0) * std::exp(-2.0 * p.p0 * (y - p.mu) / p.sigma));
}

double sl_logsf(double y, const SLParams& p) {
  if (y <= p.mu) return std::log1p(-p.p0 * std::exp(2.0 * (y - p.mu) * (1.0 - p.p0) / p.sigma));
  return std::log1p(-p.p0) - 2.0 * p.p0 * (y - p.mu) / p.sigma;
}

double sl_quantile(double u, const SLParams& p) {
  require(u > 0.0 && u < 1.0, "sl_quantile: u must lie in (0,1)");
  if (u <= p.p0) return p.mu + p.sigma / (2.0 * (1.0 - p.p0)) * std::log(u / p.p0);
  return p.mu - p.sigma / (2.0 * p.p0) * std::log((1.0 - u) / (1.0 - p.p0));
}

double sl_sample(const SLParams& p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return sl_quantile(u, p);
}

double sep_logpdf(double y, const SEPParams& p) {
  if (y <= p.mu) return -std::log(p.sigma) - sep_w_left(y, p) / p.kappa1;
  return -std::log(p.sigma) - sep_w_right(y, p) / p.kappa2;
}

double sep_cdf(double y, const SEPParams& p) {
  if (y <= p.mu) return p.p0 * reg_upper_inc_gamma(sep_w_left(y, p) / p.kappa1, 1.0 / p.kappa1);
  return p.p0 +
         (1.0 - p.p0) * reg_lower_inc_gamma(sep_w_right(y, p) / p.kappa2, 1.0 / p.kappa2);
}

double sep_logcdf(double y, const SEPParams& p) {
  if (y <= p.mu)
    return std::log(p.p0) +
           std::log(reg_upper_inc_gamma(sep_w_left(y, p) / p.kappa1, 1.0 / p.kappa1));
  return std::log(sep_cdf(y, p));
}

double sep_logsf(double y, const SEPParams& p) {
  if (y > p.mu)
    return std::log1p(-p.p0) +
           std::log(reg_upper_inc_gamma(sep_w_right(y, p) / p.kappa2, 1.0 / p.kappa2));
  return std::log1p(-sep_cdf(y, p));
}

double sep_quantile(double u, const SEPParams& p) {
  require(u > 0.0 && u < 1.0, "sep_quantile: u must lie in (0,1)");
  if (u <= p.p0) {
    const double w = inv_reg_lower_inc_gamma(1.0 - u / p.p0, 1.0 / p.kappa1);
    return p.mu - std::exp(std::log(2.0 * p.p0 * p.sigma) + p.log_k1 +
                           std::log(p.kappa1 * w) / p.kappa1);
  }
  const double w = inv_reg_lower_inc_gamma((u - p.p0) / (1.0 - p.p0), 1.0 / p.kappa2);
  return p.mu + std::exp(std::log(2.0 * (1.0 - p.p0) * p.sigma) + p.log_k2 +
                         std::log(p.kappa2 * w) / p.kappa2);
}

double sep_sample(const SEPParams& p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const bool left = unif(rng) < p.p0;
  const double kappa = left ? p.kappa1 : p.kappa2;
  std::gamma_distribution<double> gamma(1.0 / kappa, 1.0);
  const double w = gamma(rng);
  const double eps_log = std::log(kappa * w) / kappa;
  if (left) return p.mu - std::exp(std::log(2.0 * p.p0 * p.sigma) + p.log_k1 + eps_log);
  return p.mu + std::exp(std::log(2.0 * (1.0 - p.p0) * p.sigma) + p.log_k2 + eps_log);
}

}  // namespace sepq
