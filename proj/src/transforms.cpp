#include "sepq/transforms.hpp"

#include <cmath>
#include <stdexcept>

namespace sepq {

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

ParameterTransform::ParameterTransform(const ModelSpec& spec, int n_subjects)
    : spec_(spec), n_subjects_(n_subjects), q_(spec.link.random_dim()) {
  if (n_subjects < 1) throw std::invalid_argument("transform requires at least one subject");
  n_beta_ = spec.link.n_beta();
  int at = n_beta_;
  gamma_index_ = spec.link.has_cd4() ? at++ : -1;
  sigma_index_ = at++;
  n_kappa_ = spec.kernel == Kernel::sep ? 2 : 0;
  kappa_offset_ = n_kappa_ > 0 ? at : -1;
  at += n_kappa_;
  lv_diag_offset_ = at;
  at += q_;
  n_lv_offdiag_ = q_ * (q_ - 1) / 2;
  lv_offdiag_offset_ = at;
  at += n_lv_offdiag_;
  v_offset_ = at;
  dim_ = at + n_subjects_ * q_;
}

ModelParams ParameterTransform::constrain(const Eigen::VectorXd& x, double* log_jacobian) const {
  if (x.size() != dim_) throw std::invalid_argument("parameter vector has wrong dimension");
  double lj = 0.0;
  ModelParams p;
  p.fx.beta = x.segment(0, n_beta_);
  p.fx.gamma = gamma_index_ >= 0 ? x[gamma_index_] : 0.0;

  p.err.kernel = spec_.kernel;
  p.err.p0 = spec_.p0;
  p.err.sigma = std::exp(x[sigma_index_]);
  lj += x[sigma_index_];

  if (n_kappa_ > 0) {
    if (spec_.priors.kappa_prior == KappaPriorKind::uniform) {
      const double lo = spec_.priors.kappa_lo, hi = spec_.priors.kappa_hi;
      for (int k = 0; k < 2; ++k) {
        const double z = x[kappa_offset_ + k];
        const double s = 1.0 / (1.0 + std::exp(-z));
        (k == 0 ? p.err.kappa1 : p.err.kappa2) = lo + (hi - lo) * s;
        lj += std::log(hi - lo) + std::log(s) + std::log1p(-s);
      }
    } else {
      p.err.kappa1 = std::exp(x[kappa_offset_]);
      p.err.kappa2 = std::exp(x[kappa_offset_ + 1]);
      lj += x[kappa_offset_] + x[kappa_offset_ + 1];
    }
  }

  p.Lv = Eigen::MatrixXd::Zero(q_, q_);
  for (int j = 0; j < q_; ++j) {
    p.Lv(j, j) = std::exp(x[lv_diag_offset_ + j]);
    lj += x[lv_diag_offset_ + j];
  }
  int at = lv_offdiag_offset_;
  for (int i = 1; i < q_; ++i)
    for (int j = 0; j < i; ++j) p.Lv(i, j) = x[at++];

  p.v = Eigen::MatrixXd(n_subjects_, q_);
  for (int i = 0; i < n_subjects_; ++i)
    for (int k = 0; k < q_; ++k) p.v(i, k) = x[v_offset_ + i * q_ + k];

  if (log_jacobian) *log_jacobian += lj;
  return p;
}

Eigen::VectorXd ParameterTransform::unconstrain(const ModelParams& p) const {
  Eigen::VectorXd x(dim_);
  x.segment(0, n_beta_) = p.fx.beta;
  if (gamma_index_ >= 0) x[gamma_index_] = p.fx.gamma;
  x[sigma_index_] = std::log(p.err.sigma);
  if (n_kappa_ > 0) {
    if (spec_.priors.kappa_prior == KappaPriorKind::uniform) {
      const double lo = spec_.priors.kappa_lo, hi = spec_.priors.kappa_hi;
      x[kappa_offset_] = logit((p.err.kappa1 - lo) / (hi - lo));
      x[kappa_offset_ + 1] = logit((p.err.kappa2 - lo) / (hi - lo));
    } else {
      x[kappa_offset_] = std::log(p.err.kappa1);
      x[kappa_offset_ + 1] = std::log(p.err.kappa2);
    }
  }
  for (int j = 0; j < q_; ++j) x[lv_diag_offset_ + j] = std::log(p.Lv(j, j));
  int at = lv_offdiag_offset_;
  for (int i = 1; i < q_; ++i)
    for (int j = 0; j < i; ++j) x[at++] = p.Lv(i, j);
  for (int i = 0; i < n_subjects_; ++i)
    for (int k = 0; k < q_; ++k) x[v_offset_ + i * q_ + k] = p.v(i, k);
  return x;
}

double ParameterTransform::log_jacobian(const Eigen::VectorXd& x) const {
  double lj = 0.0;
  constrain(x, &lj);
  return lj;
}

Eigen::VectorXd ParameterTransform::pack(const ModelParams& p) const {
  Eigen::VectorXd c(dim_);
  c.segment(0, n_beta_) = p.fx.beta;
  if (gamma_index_ >= 0) c[gamma_index_] = p.fx.gamma;
  c[sigma_index_] = p.err.sigma;
  if (n_kappa_ > 0) {
    c[kappa_offset_] = p.err.kappa1;
    c[kappa_offset_ + 1] = p.err.kappa2;
  }
  for (int j = 0; j < q_; ++j) c[lv_diag_offset_ + j] = p.Lv(j, j);
  int at = lv_offdiag_offset_;
  for (int i = 1; i < q_; ++i)
    for (int j = 0; j < i; ++j) c[at++] = p.Lv(i, j);
  for (int i = 0; i < n_subjects_; ++i)
    for (int k = 0; k < q_; ++k) c[v_offset_ + i * q_ + k] = p.v(i, k);
  return c;
}

ModelParams ParameterTransform::unpack(const Eigen::VectorXd& c) const {
  if (c.size() != dim_) throw std::invalid_argument("constrained vector has wrong dimension");
  ModelParams p;
  p.fx.beta = c.segment(0, n_beta_);
  p.fx.gamma = gamma_index_ >= 0 ? c[gamma_index_] : 0.0;
  p.err.kernel = spec_.kernel;
  p.err.p0 = spec_.p0;
  p.err.sigma = c[sigma_index_];
  if (n_kappa_ > 0) {
    p.err.kappa1 = c[kappa_offset_];
    p.err.kappa2 = c[kappa_offset_ + 1];
  }
  p.Lv = Eigen::MatrixXd::Zero(q_, q_);
  for (int j = 0; j < q_; ++j) p.Lv(j, j) = c[lv_diag_offset_ + j];
  int at = lv_offdiag_offset_;
  for (int i = 1; i < q_; ++i)
    for (int j = 0; j < i; ++j) p.Lv(i, j) = c[at++];
  p.v = Eigen::MatrixXd(n_subjects_, q_);
  for (int i = 0; i < n_subjects_; ++i)
    for (int k = 0; k < q_; ++k) p.v(i, k) = c[v_offset_ + i * q_ + k];
  return p;
}

std::vector<std::string> ParameterTransform::names() const {
  std::vector<std::string> out;
  out.reserve(dim_);
  for (int j = 0; j < n_beta_; ++j) out.push_back("beta[" + std::to_string(j + 1) + "]");
  if (gamma_index_ >= 0) out.push_back("gamma");
  out.push_back("sigma");
  if (n_kappa_ > 0) {
    out.push_back("kappa1");
    out.push_back("kappa2");
  }
  for (int j = 0; j < q_; ++j)
    out.push_back("Lv[" + std::to_string(j + 1) + "," + std::to_string(j + 1) + "]");
  for (int i = 1; i < q_; ++i)
    for (int j = 0; j < i; ++j)
      out.push_back("Lv[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  for (int i = 0; i < n_subjects_; ++i)
    for (int k = 0; k < q_; ++k)
      out.push_back("v[" + std::to_string(i + 1) + "," + std::to_string(k + 1) + "]");
  return out;
}

double log_posterior_unconstrained(const Eigen::VectorXd& x, const Dataset& data,
                                   const ModelSpec& spec) {
  const ParameterTransform tf(spec, data.n_subjects());
  double lj = 0.0;
  const ModelParams params = tf.constrain(x, &lj);
  const double prior = log_prior(params, spec, data.n_subjects());
  if (prior == -std::numeric_limits<double>::infinity()) return prior;
  const double lik = log_likelihood(data, params, spec);
  const double total = lik + prior + lj;
  if (std::isnan(total))
    throw std::runtime_error("log-posterior evaluated to NaN");
  return total;
}

}  // namespace sepq
