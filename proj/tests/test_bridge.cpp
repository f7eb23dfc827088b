#include <doctest.h>

#include <cmath>
#include <random>

#include "sepq/bridge.hpp"
#include "support/stats.hpp"

using namespace sepq;
namespace ts = testsupport;

namespace {

// Analytic log evidence for y_i ~ N(theta, sigma2), theta ~ N(0, tau2).
double conjugate_log_evidence(const std::vector<double>& y, double sigma2, double tau2) {
  const double n = static_cast<double>(y.size());
  double sum = 0.0, sumsq = 0.0;
  for (double v : y) {
    sum += v;
    sumsq += v * v;
  }
  const double logdet = (n - 1.0) * std::log(sigma2) + std::log(sigma2 + n * tau2);
  const double quad = sumsq / sigma2 - tau2 * sum * sum / (sigma2 * (sigma2 + n * tau2));
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + quad);
}

}  // namespace

TEST_SUITE("bridge") {

TEST_CASE("proposal moment matching") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> gauss;
  const int n = 4000;
  Eigen::MatrixXd draws(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = gauss(gen), b = gauss(gen);
    draws(i, 0) = 1.0 + a;
    draws(i, 1) = -2.0 + 0.5 * a + 0.3 * b;
  }
  const ProposalDist prop = fit_proposal(draws);
  CHECK(std::abs(prop.mean[0] - 1.0) <= 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(prop.mean[1] + 2.0) <= 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK_FALSE(prop.jittered);

  const ProposalDist again = fit_proposal(draws);
  CHECK((again.mean - prop.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.chol - prop.chol).cwiseAbs().maxCoeff() == 0.0);

  // density normalizes: compare against the scalar normal formula in 1-D
  Eigen::MatrixXd one(n, 1);
  for (int i = 0; i < n; ++i) one(i, 0) = 2.0 * gauss(gen);
  const ProposalDist p1 = fit_proposal(one);
  const double sd = p1.chol(0, 0);
  for (double x : {-3.0, 0.0, 1.5}) {
    CHECK(std::abs(p1.logpdf(Eigen::VectorXd::Constant(1, x)) -
                   ts::normal_logpdf(x, p1.mean[0], sd)) <= 1e-12);
  }
}

TEST_CASE("rank-deficient draws get a jitter and stay usable") {
  const int n = 50;
  Eigen::MatrixXd draws(n, 2);
  for (int i = 0; i < n; ++i) {
    draws(i, 0) = 0.1 * i;
    draws(i, 1) = 0.2 * i;  // perfectly collinear
  }
  const ProposalDist prop = fit_proposal(draws);
  CHECK(prop.jittered);
  CHECK(std::isfinite(prop.logpdf(prop.mean)));
}

TEST_CASE("proposal equal to the target up to a constant") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> gauss;
  const int n = 500;
  Eigen::MatrixXd draws(n, 1);
  for (int i = 0; i < n; ++i) draws(i, 0) = gauss(gen);
  const ProposalDist prop = fit_proposal(draws);

  const double c = 3.7;
  auto log_post = [&](const Eigen::VectorXd& x) { return prop.logpdf(x) + c; };
  Rng rng(5);
  const BridgeResult r = bridge_log_ml(draws, prop, log_post, 1e-10, 1000, rng);
  CHECK(r.converged);
  CHECK(r.iterations <= 3);
  CHECK(std::abs(r.log_ml - c) <= 1e-9);
}

TEST_CASE("conjugate evidence within 0.05 log units") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> gauss;
  std::vector<double> y(25);
  for (auto& v : y) v = 0.4 + gauss(gen);
  const double sigma2 = 1.0, tau2 = 4.0;
  const double analytic = conjugate_log_evidence(y, sigma2, tau2);

  // exact posterior draws, no MCMC needed
  const double n = static_cast<double>(y.size());
  double sum = 0.0;
  for (double v : y) sum += v;
  const double post_var = 1.0 / (n / sigma2 + 1.0 / tau2);
  const double post_mean = post_var * sum / sigma2;
  const int n_draws = 8000;
  Eigen::MatrixXd draws(n_draws, 1);
  for (int i = 0; i < n_draws; ++i) draws(i, 0) = post_mean + std::sqrt(post_var) * gauss(gen);

  auto log_post = [&](const Eigen::VectorXd& x) {
    const double theta = x[0];
    double lp = ts::normal_logpdf(theta, 0.0, std::sqrt(tau2));
    for (double v : y) lp += ts::normal_logpdf(v, theta, std::sqrt(sigma2));
    return lp;
  };

  const ProposalDist prop = fit_proposal(draws.topRows(n_draws / 2));
  Rng rng(33);
  const BridgeResult r =
      bridge_log_ml(draws.bottomRows(n_draws / 2), prop, log_post, 1e-10, 1000, rng, 4000);
  CHECK(r.converged);
  CHECK(std::abs(r.log_ml - analytic) <= 0.05);

  SUBCASE("scaling the posterior by e^5 shifts the estimate by exactly 5") {
    auto scaled = [&](const Eigen::VectorXd& x) { return log_post(x) + 5.0; };
    Rng rng2(33);
    const BridgeResult r2 =
        bridge_log_ml(draws.bottomRows(n_draws / 2), prop, scaled, 1e-10, 1000, rng2, 4000);
    CHECK(std::abs((r2.log_ml - r.log_ml) - 5.0) <= 1e-8);
  }

  SUBCASE("estimates are stable across seeds") {
    Rng rng3(1234);
    const BridgeResult r3 =
        bridge_log_ml(draws.bottomRows(n_draws / 2), prop, log_post, 1e-10, 1000, rng3, 4000);
    CHECK(std::abs(r3.log_ml - r.log_ml) <= 0.1);
  }
}

TEST_CASE("split-half wrapper uses the halves as documented") {
  std::mt19937_64 gen(71);
  std::normal_distribution<double> gauss;
  const int n = 2000;
  PosteriorDraws draws;
  draws.unconstrained.resize(n, 1);
  for (int i = 0; i < n; ++i) draws.unconstrained(i, 0) = 2.0 + 0.7 * gauss(gen);
  draws.values = draws.unconstrained;
  draws.names = {"theta"};
  draws.lp = Eigen::VectorXd::Zero(n);
  draws.chain.assign(n, 0);
  draws.n_chains = 1;
  draws.n_keep = n;

  auto log_post = [&](const Eigen::VectorXd& x) {
    return ts::normal_logpdf(x[0], 2.0, 0.7) + 1.25;  // normalizer is exactly 1.25
  };
  BridgeConfig cfg;
  cfg.seed = 909;
  const BridgeResult a = estimate_log_ml(draws, log_post, cfg);

  const ProposalDist prop = fit_proposal(draws.unconstrained.topRows(n / 2));
  Rng rng(cfg.seed);
  const BridgeResult b =
      bridge_log_ml(draws.unconstrained.bottomRows(n - n / 2), prop, log_post, cfg.tol,
                    cfg.max_iter, rng, cfg.n_proposal_draws);
  CHECK(a.log_ml == b.log_ml);
  CHECK(std::abs(a.log_ml - 1.25) <= 0.05);
}

}  // TEST_SUITE
