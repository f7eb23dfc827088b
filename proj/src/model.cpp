#include "sepq/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sepq/special_functions.hpp"

namespace sepq {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

double link_linear(double t, const FixedEffects& fx, const Eigen::Ref<const Eigen::VectorXd>& v) {
  return fx.beta[0] + v[0] + (fx.beta[1] + v[1]) * t;
}

double link_biexponential(double t, double cd4, const FixedEffects& fx,
                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double lambda1 = fx.beta[1] + v[1];
  const double lambda2 = fx.beta[3] + v[3] + fx.gamma * cd4;
  const double term1 = std::exp(fx.beta[0] + v[0] - lambda1 * t);
  const double term2 = std::exp(fx.beta[2] + v[2] - lambda2 * t);
  const double inner = term1 + term2;
  if (inner <= 0.0) return kNegInf;
  return std::log10(inner);
}

double link_eval(const LinkFunction& link, const Observation& obs, const FixedEffects& fx,
                 const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (link.kind == LinkKind::linear) return link_linear(obs.time, fx, v);
  return link_biexponential(obs.time, obs.covariates[link.cd4_index], fx, v);
}

ResidualKernel::ResidualKernel(const ErrorModel& err)
    : k_(err.kernel == Kernel::sl
             ? std::variant<SLParams, SEPParams>(SLParams(0.0, err.sigma, err.p0))
             : std::variant<SLParams, SEPParams>(
                   SEPParams(0.0, err.sigma, err.kappa1, err.kappa2, err.p0))) {}

double ResidualKernel::logpdf(double e) const {
  if (const auto* sl = std::get_if<SLParams>(&k_)) return sl_logpdf(e, *sl);
  return sep_logpdf(e, std::get<SEPParams>(k_));
}

double ResidualKernel::cdf(double e) const {
  if (const auto* sl = std::get_if<SLParams>(&k_)) return sl_cdf(e, *sl);
  return sep_cdf(e, std::get<SEPParams>(k_));
}

double ResidualKernel::logcdf(double e) const {
  if (const auto* sl = std::get_if<SLParams>(&k_)) return sl_logcdf(e, *sl);
  return sep_logcdf(e, std::get<SEPParams>(k_));
}

double ResidualKernel::logsf(double e) const {
  if (const auto* sl = std::get_if<SLParams>(&k_)) return sl_logsf(e, *sl);
  return sep_logsf(e, std::get<SEPParams>(k_));
}

double ResidualKernel::sample(Rng& rng) const {
  if (const auto* sl = std::get_if<SLParams>(&k_)) return sl_sample(*sl, rng);
  return sep_sample(std::get<SEPParams>(k_), rng);
}

double random_effects_logdensity(const Eigen::Ref<const Eigen::VectorXd>& v,
                                 const RandomEffectsSpec& re) {
  const int q = re.dim;
  // ||L^T v||^2, exploiting the lower-triangular structure
  double quad = 0.0;
  for (int j = 0; j < q; ++j) {
    double s = 0.0;
    for (int i = j; i < q; ++i) s += re.chol_precision(i, j) * v[i];
    quad += s * s;
  }
  double logdet = 0.0;
  for (int j = 0; j < q; ++j) logdet += std::log(re.chol_precision(j, j));
  return logdet - 0.5 * q * kLog2Pi - 0.5 * quad;
}

double half_t_logpdf(double x, double nu, double scale) {
  if (!(x >= 0.0)) return kNegInf;
  const double z = x / scale;
  return std::log(2.0) + log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI) - std::log(scale) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double normal_logpdf(double x, double variance) {
  return -0.5 * (kLog2Pi + std::log(variance)) - 0.5 * x * x / variance;
}

double obs_loglik(const Observation& obs, double mu, const ErrorModel& err) {
  return obs_loglik(obs, mu, ResidualKernel(err));
}

double obs_loglik(const Observation& obs, double mu, const ResidualKernel& kernel) {
  switch (obs.censor) {
    case CensorKind::observed:
      return kernel.logpdf(obs.response - mu);
    case CensorKind::left:
      return kernel.logcdf(obs.response - mu);
    case CensorKind::right:
      return kernel.logsf(obs.response - mu);
    case CensorKind::interval: {
      const double p = kernel.cdf(obs.upper - mu) - kernel.cdf(obs.response - mu);
      return p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return kNegInf;
}

double subject_loglik(const Dataset& data, int subject, const ModelParams& params,
                      const ModelSpec& spec, const ResidualKernel& kernel) {
  const auto [first, last] = data.subject_span(subject);
  const auto& obs = data.observations();
  const Eigen::VectorXd v = params.v.row(subject);
  double total = 0.0;
  for (int r = first; r < last; ++r) {
    const double mu = link_eval(spec.link, obs[r], params.fx, v);
    total += obs_loglik(obs[r], mu, kernel);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double log_likelihood(const Dataset& data, const ModelParams& params, const ModelSpec& spec) {
  const ResidualKernel kernel(params.err);
  double total = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i) {
    total += subject_loglik(data, i, params, spec, kernel);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double log_prior_fixed(const ModelParams& params, const ModelSpec& spec) {
  const PriorSpec& pr = spec.priors;
  double lp = 0.0;
  for (int j = 0; j < params.fx.beta.size(); ++j)
    lp += normal_logpdf(params.fx.beta[j], pr.beta_variance);
  if (spec.link.has_cd4()) lp += normal_logpdf(params.fx.gamma, pr.beta_variance);
  return lp;
}

double log_prior_error(const ModelParams& params, const ModelSpec& spec) {
  const PriorSpec& pr = spec.priors;
  double lp = half_t_logpdf(params.err.sigma, pr.half_t_nu, pr.half_t_scale);
  if (spec.kernel == Kernel::sep) {
    if (pr.kappa_prior == KappaPriorKind::half_t) {
      lp += half_t_logpdf(params.err.kappa1, pr.half_t_nu, pr.half_t_scale);
      lp += half_t_logpdf(params.err.kappa2, pr.half_t_nu, pr.half_t_scale);
    } else {
      const double width = pr.kappa_hi - pr.kappa_lo;
      const bool inside = params.err.kappa1 > pr.kappa_lo && params.err.kappa1 < pr.kappa_hi &&
                          params.err.kappa2 > pr.kappa_lo && params.err.kappa2 < pr.kappa_hi;
      if (!inside) return kNegInf;
      lp += -2.0 * std::log(width);
    }
  }
  return lp;
}

double log_prior_chol(const ModelParams& params, const ModelSpec& spec) {
  const PriorSpec& pr = spec.priors;
  const int q = spec.link.random_dim();
  double lp = 0.0;
  for (int j = 0; j < q; ++j)
    lp += half_t_logpdf(params.Lv(j, j), pr.half_t_nu, pr.half_t_scale);
  for (int i = 1; i < q; ++i)
    for (int j = 0; j < i; ++j) lp += normal_logpdf(params.Lv(i, j), pr.offdiag_variance);
  return lp;
}

double log_prior(const ModelParams& params, const ModelSpec& spec, int n_subjects) {
  double lp = log_prior_fixed(params, spec) + log_prior_error(params, spec) +
              log_prior_chol(params, spec);
  if (lp == kNegInf) return kNegInf;
  const RandomEffectsSpec re{spec.link.random_dim(), params.Lv};
  for (int i = 0; i < n_subjects; ++i) lp += random_effects_logdensity(params.v.row(i), re);
  return lp;
}

}  // namespace sepq
