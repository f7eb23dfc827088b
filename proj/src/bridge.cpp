#include "sepq/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sepq {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + h, v.end());
  double m = v[h];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + h - 1, v.end());
    m = 0.5 * (m + v[h - 1]);
  }
  return m;
}
}  // namespace

double ProposalDist::logpdf(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(x - mean);
  return log_norm - 0.5 * z.squaredNorm();
}

Eigen::VectorXd ProposalDist::sample(Rng& rng) const {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd z(mean.size());
  for (long i = 0; i < z.size(); ++i) z[i] = gauss(rng);
  return mean + chol.triangularView<Eigen::Lower>() * z;
}

ProposalDist fit_proposal(const Eigen::MatrixXd& draws) {
  const long n = draws.rows();
  const long d = draws.cols();
  if (n < 2 * d)
    throw std::invalid_argument("fit_proposal needs at least 2*dim draws");

  ProposalDist prop;
  prop.mean = draws.colwise().mean();
  Eigen::MatrixXd centered = draws.rowwise() - prop.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

  double ridge = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd c = cov;
    if (ridge > 0.0) {
      c.diagonal().array() += ridge;
      prop.jittered = true;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      prop.chol = llt.matrixL();
      double logdet = 0.0;
      for (long j = 0; j < d; ++j) logdet += std::log(prop.chol(j, j));
      prop.log_norm = -0.5 * d * kLog2Pi - logdet;
      return prop;
    }
    ridge = ridge == 0.0 ? 1e-10 * std::max(cov.trace() / d, 1e-300) : ridge * 10.0;
  }
  throw std::runtime_error("fit_proposal: covariance not positive definite after jitter");
}

BridgeResult bridge_log_ml(const Eigen::MatrixXd& posterior_half, const ProposalDist& proposal,
                           const std::function<double(const Eigen::VectorXd&)>& log_post,
                           double tol, int max_iter, Rng& rng, int n_proposal_draws) {
  const long n1 = posterior_half.rows();
  if (n1 < 2) throw std::invalid_argument("bridge_log_ml needs posterior draws");
  const long n2 = n_proposal_draws > 0 ? n_proposal_draws : n1;

  // l = log p~(theta) - log g(theta) on both draw sets
  std::vector<double> l1(n1);
  for (long i = 0; i < n1; ++i) {
    const Eigen::VectorXd x = posterior_half.row(i).transpose();
    l1[i] = log_post(x) - proposal.logpdf(x);
  }
  std::vector<double> l2(n2);
  for (long j = 0; j < n2; ++j) {
    const Eigen::VectorXd x = proposal.sample(rng);
    l2[j] = log_post(x) - proposal.logpdf(x);
  }

  const double lstar = median(l1);
  const double s1 = static_cast<double>(n1) / static_cast<double>(n1 + n2);
  const double s2 = static_cast<double>(n2) / static_cast<double>(n1 + n2);

  // Initialize from the plain importance-sampling estimate on proposal draws.
  double log_r = 0.0;
  {
    double vmax = kNegInf;
    for (long j = 0; j < n2; ++j) vmax = std::max(vmax, l2[j] - lstar);
    if (std::isfinite(vmax)) {
      double s = 0.0;
      for (long j = 0; j < n2; ++j) s += std::exp(l2[j] - lstar - vmax);
      log_r = vmax + std::log(s / static_cast<double>(n2));
    }
  }

  BridgeResult result;
  result.n_posterior_draws = static_cast<int>(n1);
  result.n_proposal_draws = static_cast<int>(n2);

  for (int it = 0; it < max_iter; ++it) {
    const double r = std::exp(log_r);
    // numerator term: e2/(s1 e2 + s2 r) written as 1/(s1 + s2 r e^{-v})
    double num = 0.0;
    for (long j = 0; j < n2; ++j) {
      const double v = l2[j] - lstar;
      if (v == kNegInf) continue;  // zero-density proposal draw contributes nothing
      num += 1.0 / (s1 + s2 * std::exp(log_r - v));
    }
    num /= static_cast<double>(n2);
    double den = 0.0;
    for (long i = 0; i < n1; ++i) {
      const double v = l1[i] - lstar;
      den += 1.0 / (s1 * std::exp(v) + s2 * r);
    }
    den /= static_cast<double>(n1);

    const double log_r_new = std::log(num) - std::log(den);
    result.iterations = it + 1;
    const double delta = std::abs(log_r_new - log_r);
    log_r = log_r_new;
    if (delta < tol) {
      result.converged = true;
      break;
    }
  }
  result.log_ml = log_r + lstar;
  return result;
}

BridgeResult estimate_log_ml(const PosteriorDraws& draws,
                             const std::function<double(const Eigen::VectorXd&)>& log_post,
                             const BridgeConfig& cfg) {
  const long n = draws.unconstrained.rows();
  const long half = n / 2;
  if (half < 2) throw std::invalid_argument("estimate_log_ml needs at least 4 draws");
  const ProposalDist prop = fit_proposal(draws.unconstrained.topRows(half));
  Rng rng(cfg.seed);
  return bridge_log_ml(draws.unconstrained.bottomRows(n - half), prop, log_post, cfg.tol,
                       cfg.max_iter, rng, cfg.n_proposal_draws);
}

}  // namespace sepq
