#ifndef SEPQ_DISTRIBUTIONS_HPP
#define SEPQ_DISTRIBUTIONS_HPP

#include <random>

namespace sepq {

using Rng = std::mt19937_64;

/// Target quantile level; the location parameter of both kernels is anchored
/// at the p0-th quantile.
class QuantileLevel {
 public:
  explicit QuantileLevel(double p0);
  double value() const { return p0_; }

 private:
  double p0_;
};

/// Skew Laplace kernel. Skewness is fixed by the quantile level p0.
struct SLParams {
  SLParams(double mu, double sigma, double p0);
  double mu;
  double sigma;
  double p0;
};

/// Skew exponential power kernel. kappa1/kappa2 shape the left/right tails
/// independently of the quantile level. Normalizing constants are kept in
/// log form so extreme shapes stay evaluable.
struct SEPParams {
  SEPParams(double mu, double sigma, double kappa1, double kappa2, double p0);
  double mu;
  double sigma;
  double kappa1;
  double kappa2;
  double p0;
  double log_k1;  // ln of the left normalizing constant
  double log_k2;  // ln of the right normalizing constant
};

/// K(kappa) = kappa^(-1/kappa) / (2 Gamma(1 + 1/kappa)).
double sep_norm_constant(double kappa);
double sep_log_norm_constant(double kappa);

double sl_logpdf(double y, const SLParams& p);
double sl_cdf(double y, const SLParams& p);
double sl_logcdf(double y, const SLParams& p);
double sl_logsf(double y, const SLParams& p);
double sl_quantile(double u, const SLParams& p);
double sl_sample(const SLParams& p, Rng& rng);

double sep_logpdf(double y, const SEPParams& p);
double sep_cdf(double y, const SEPParams& p);
double sep_logcdf(double y, const SEPParams& p);
double sep_logsf(double y, const SEPParams& p);
double sep_quantile(double u, const SEPParams& p);
double sep_sample(const SEPParams& p, Rng& rng);

}  // namespace sepq

#endif  // SEPQ_DISTRIBUTIONS_HPP
