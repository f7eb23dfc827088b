#ifndef SEPQ_MODEL_HPP
#define SEPQ_MODEL_HPP

#include <Eigen/Dense>
#include <variant>

#include "sepq/data.hpp"
#include "sepq/distributions.hpp"

namespace sepq {

enum class Kernel { sl, sep };
enum class LinkKind { linear, biexponential };

/// Quantile link g(x, v, beta). The linear variant is a random
/// intercept/slope line in time; the biexponential variant is a two-phase
/// viral decay curve on the log10 scale whose slow rate is shifted by a
/// time-varying covariate (CD4).
struct LinkFunction {
  LinkKind kind = LinkKind::linear;
  int cd4_index = 0;  // covariate column feeding the slow-phase rate

  int n_beta() const { return kind == LinkKind::linear ? 2 : 4; }
  int random_dim() const { return kind == LinkKind::linear ? 2 : 4; }
  bool has_cd4() const { return kind == LinkKind::biexponential; }
  int required_covariates() const { return has_cd4() ? cd4_index + 1 : 0; }
};

struct FixedEffects {
  Eigen::VectorXd beta;
  double gamma = 0.0;
};

double link_linear(double t, const FixedEffects& fx, const Eigen::Ref<const Eigen::VectorXd>& v);

/// log10(P1 e^(-lambda1 t) + P2 e^(-lambda2 t)) with P1 = exp(beta1 + v1),
/// lambda1 = beta2 + v2, P2 = exp(beta3 + v3), lambda2 = beta4 + v4 + gamma*cd4.
/// Returns -inf if the inner sum underflows to zero; never NaN.
double link_biexponential(double t, double cd4, const FixedEffects& fx,
                          const Eigen::Ref<const Eigen::VectorXd>& v);

double link_eval(const LinkFunction& link, const Observation& obs, const FixedEffects& fx,
                 const Eigen::Ref<const Eigen::VectorXd>& v);

struct ErrorModel {
  Kernel kernel = Kernel::sep;
  double sigma = 1.0;
  double kappa1 = 1.0;  // sep only
  double kappa2 = 1.0;  // sep only
  double p0 = 0.5;
};

/// Zero-location kernel with constants precomputed once per parameter state.
/// Likelihood loops evaluate at the centered residual y - mu.
class ResidualKernel {
 public:
  explicit ResidualKernel(const ErrorModel& err);
  double logpdf(double e) const;
  double cdf(double e) const;
  double logcdf(double e) const;
  double logsf(double e) const;
  double sample(Rng& rng) const;

 private:
  std::variant<SLParams, SEPParams> k_;
};

enum class KappaPriorKind { half_t, uniform };

struct PriorSpec {
  double beta_variance = 1000.0;  // N(0, beta_variance) on beta, gamma, off-diagonals
  double half_t_nu = 3.0;
  double half_t_scale = 1.4142135623730951;  // sqrt(2)
  KappaPriorKind kappa_prior = KappaPriorKind::half_t;
  double kappa_lo = 0.01;  // uniform prior support
  double kappa_hi = 3.0;
  double offdiag_variance = 1000.0;
};

/// Random effects v_i ~ N(0, Sigma_v) parameterized through the precision
/// Cholesky factor: Sigma_v^{-1} = L_v L_v^T, L_v lower triangular.
struct RandomEffectsSpec {
  int dim = 2;
  Eigen::MatrixXd chol_precision;
};

double random_effects_logdensity(const Eigen::Ref<const Eigen::VectorXd>& v,
                                 const RandomEffectsSpec& re);

struct ModelSpec {
  LinkFunction link;
  Kernel kernel = Kernel::sep;
  double p0 = 0.5;
  PriorSpec priors;
};

/// Constrained-scale parameter bundle.
struct ModelParams {
  FixedEffects fx;
  ErrorModel err;
  Eigen::MatrixXd Lv;  // q x q lower triangular, positive diagonal
  Eigen::MatrixXd v;   // n_subjects x q, row i = v_i
};

double half_t_logpdf(double x, double nu, double scale);
double normal_logpdf(double x, double variance);

/// Censored likelihood term: pdf for observed rows, F(bound) for left,
/// 1 - F(bound) for right, F(upper) - F(lower) for interval. Returns -inf
/// when the censoring probability is exactly zero.
double obs_loglik(const Observation& obs, double mu, const ErrorModel& err);
double obs_loglik(const Observation& obs, double mu, const ResidualKernel& kernel);

double subject_loglik(const Dataset& data, int subject, const ModelParams& params,
                      const ModelSpec& spec, const ResidualKernel& kernel);
double log_likelihood(const Dataset& data, const ModelParams& params, const ModelSpec& spec);

/// Prior pieces, split so sampler blocks can evaluate only what they touch.
double log_prior_fixed(const ModelParams& params, const ModelSpec& spec);
double log_prior_error(const ModelParams& params, const ModelSpec& spec);
double log_prior_chol(const ModelParams& params, const ModelSpec& spec);

/// Joint prior: normals on beta/gamma/off-diagonals, half-t on sigma and the
/// L_v diagonal, the configured prior on the kappas, and the N(0, Sigma_v)
/// density of every subject's random effects.
double log_prior(const ModelParams& params, const ModelSpec& spec, int n_subjects);

}  // namespace sepq

#endif  // SEPQ_MODEL_HPP
