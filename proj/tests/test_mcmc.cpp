#include <doctest.h>

#include <cmath>
#include <random>

#include "sepq/mcmc.hpp"
#include "sepq/simstudy.hpp"
#include "support/stats.hpp"

using namespace sepq;
namespace ts = testsupport;

namespace {

// Conjugate toy: y_i ~ N(theta, 1) with theta ~ N(0, tau^2). The target is
// built from likelihood x prior, so the engine has to do real work.
class ConjugateTarget : public McmcTarget {
 public:
  ConjugateTarget(std::vector<double> y, double tau2) : y_(std::move(y)), tau2_(tau2) {
    blocks_.push_back({"theta", 0, 1});
  }
  int dim() const override { return 1; }
  const std::vector<BlockSpec>& blocks() const override { return blocks_; }
  double log_density(const Eigen::VectorXd& x) const override {
    const double theta = x[0];
    double ld = -0.5 * theta * theta / tau2_;
    for (double yi : y_) ld += -0.5 * (yi - theta) * (yi - theta);
    return ld;
  }
  double post_mean() const {
    double s = 0.0;
    for (double yi : y_) s += yi;
    return s / (y_.size() + 1.0 / tau2_);
  }
  double post_var() const { return 1.0 / (y_.size() + 1.0 / tau2_); }

 private:
  std::vector<double> y_;
  double tau2_;
  std::vector<BlockSpec> blocks_;
};

// Correlated bivariate normal in two scalar blocks; closed-form marginals.
class BivariateTarget : public McmcTarget {
 public:
  BivariateTarget() {
    blocks_.push_back({"x1", 0, 1});
    blocks_.push_back({"x2", 1, 1});
  }
  int dim() const override { return 2; }
  const std::vector<BlockSpec>& blocks() const override { return blocks_; }
  double log_density(const Eigen::VectorXd& x) const override {
    // covariance [[1, .8], [.8, 1]]
    const double det = 1.0 - 0.64;
    const double q = (x[0] * x[0] - 2.0 * 0.8 * x[0] * x[1] + x[1] * x[1]) / det;
    return -0.5 * q;
  }

 private:
  std::vector<BlockSpec> blocks_;
};

Dataset small_sim_dataset(std::uint64_t seed) {
  SimScenario s;
  s.n_subjects = 8;
  s.kappa1 = 1.0;
  s.kappa2 = 1.0;
  s.re_chol = (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 0.5).finished();
  Dataset data = generate_dataset(s, seed);
  return apply_censoring(data, 0.05);
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("conjugate posterior recovered within Monte Carlo error") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> gauss;
  std::vector<double> y(20);
  for (auto& v : y) v = 0.3 + gauss(gen);
  ConjugateTarget target(y, 4.0);

  ChainConfig cfg;
  cfg.n_chains = 4;
  cfg.n_warmup = 2000;
  cfg.n_keep = 2000;
  cfg.seed = 42;
  const RawDraws draws = run_mcmc(target, Eigen::VectorXd::Zero(1), cfg);

  const Eigen::VectorXd theta = draws.x.col(0);
  const double mean = theta.mean();
  const double var = (theta.array() - mean).square().sum() / (theta.size() - 1);
  const double ess = effective_sample_size(theta, cfg.n_chains).value();
  const double mcse_mean = std::sqrt(var / ess);
  const double mcse_var = var * std::sqrt(2.0 / ess);

  CHECK(std::abs(mean - target.post_mean()) <= 3.0 * mcse_mean);
  CHECK(std::abs(var - target.post_var()) <= 3.0 * mcse_var);
  CHECK(split_rhat(theta, cfg.n_chains).value() < 1.01);

  // post-warmup acceptance guardrail
  for (double rate : draws.accept_rate) {
    CHECK(rate >= 0.1);
    CHECK(rate <= 0.7);
  }
}

TEST_CASE("determinism under a fixed seed") {
  ConjugateTarget target({0.1, -0.4, 0.9}, 1.0);
  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 300;
  cfg.n_keep = 200;
  cfg.seed = 7;
  const RawDraws a = run_mcmc(target, Eigen::VectorXd::Zero(1), cfg);
  const RawDraws b = run_mcmc(target, Eigen::VectorXd::Zero(1), cfg);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.lp - b.lp).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("marginal quantiles match the target (detailed balance smoke test)") {
  BivariateTarget target;
  ChainConfig cfg;
  cfg.n_chains = 4;
  cfg.n_warmup = 3000;
  cfg.n_keep = 5000;
  cfg.seed = 99;
  const RawDraws draws = run_mcmc(target, Eigen::VectorXd::Zero(2), cfg);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd col = draws.x.col(j);
    std::vector<double> v(col.data(), col.data() + col.size());
    const double ess = effective_sample_size(col, cfg.n_chains).value();
    for (double u : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const double q = empirical_quantile(v, u);
      const double target_q = ts::normal_quantile(u);  // unit marginal variance
      // quantile MC error via the asymptotic density formula
      const double dens = std::exp(ts::normal_logpdf(target_q, 0.0, 1.0));
      const double se = std::sqrt(u * (1.0 - u) / ess) / dens;
      CHECK(std::abs(q - target_q) <= 4.0 * se);
    }
  }
}

TEST_CASE("rhat behavior") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> gauss;

  SUBCASE("iid chains sit near one") {
    Eigen::VectorXd values(4 * 2000);
    for (long i = 0; i < values.size(); ++i) values[i] = gauss(gen);
    const double r = split_rhat(values, 4).value();
    CHECK(r >= 0.99);
    CHECK(r <= 1.02);
  }
  SUBCASE("separated chains blow up") {
    Eigen::VectorXd values(2 * 1000);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 1000; ++i) values[c * 1000 + i] = 5.0 * c + 0.1 * gauss(gen);
    CHECK(split_rhat(values, 2).value() > 5.0);
  }
  SUBCASE("single chain splits in half") {
    Eigen::VectorXd values(4000);
    for (long i = 0; i < values.size(); ++i) values[i] = gauss(gen);
    const double r = split_rhat(values, 1).value();
    CHECK(r >= 0.99);
    CHECK(r <= 1.02);
  }
  SUBCASE("constant chain is degenerate") {
    Eigen::VectorXd values = Eigen::VectorXd::Constant(800, 3.0);
    CHECK(!split_rhat(values, 2).has_value());
    CHECK(!effective_sample_size(values, 2).has_value());
  }
}

TEST_CASE("effective sample size") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> gauss;

  SUBCASE("iid draws give ess near n") {
    const int n = 8000;
    Eigen::VectorXd values(n);
    for (int i = 0; i < n; ++i) values[i] = gauss(gen);
    const double ess = effective_sample_size(values, 1).value();
    CHECK(ess >= 0.8 * n);
    CHECK(ess <= 1.25 * n);
  }
  SUBCASE("ar(1) draws match the analytic rate") {
    const int n = 40000;
    const double rho = 0.9;
    Eigen::VectorXd values(n);
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
      x = rho * x + std::sqrt(1.0 - rho * rho) * gauss(gen);
      values[i] = x;
    }
    const double ess = effective_sample_size(values, 1).value();
    const double expected = n * (1.0 - rho) / (1.0 + rho);
    CHECK(ess >= 0.7 * expected);
    CHECK(ess <= 1.3 * expected);
  }
  SUBCASE("translation leaves ess unchanged") {
    const int n = 4000;
    Eigen::VectorXd values(n);
    for (int i = 0; i < n; ++i) values[i] = gauss(gen);
    const double a = effective_sample_size(values, 2).value();
    const double b = effective_sample_size(values.array() + 100.0, 2).value();
    CHECK(std::abs(a - b) <= 1e-6 * a);
  }
}

TEST_CASE("model fit: support constraints, determinism, column names") {
  const Dataset data = small_sim_dataset(123);
  ModelSpec spec;
  spec.link.kind = LinkKind::linear;
  spec.kernel = Kernel::sep;
  spec.p0 = 0.5;
  spec.priors.kappa_prior = KappaPriorKind::uniform;

  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 400;
  cfg.n_keep = 300;
  cfg.seed = 2024;

  const SampleResult a = run_chains(data, spec, cfg);
  const SampleResult b = run_chains(data, spec, cfg);
  CHECK((a.draws.values - b.draws.values).cwiseAbs().maxCoeff() == 0.0);

  const PosteriorDraws& d = a.draws;
  CHECK(d.names.front() == "beta[1]");
  CHECK(d.column("sigma") >= 0);
  CHECK(d.column("kappa1") >= 0);
  CHECK(d.column("Lv[2,1]") >= 0);
  CHECK(d.column("v[8,2]") >= 0);
  CHECK(d.column("nope") == -1);

  for (const char* name : {"sigma", "kappa1", "kappa2", "Lv[1,1]", "Lv[2,2]"}) {
    const Eigen::VectorXd col = d.values.col(d.column(name));
    CHECK(col.minCoeff() > 0.0);
  }
  // uniform prior support honored in every retained draw
  CHECK(d.values.col(d.column("kappa1")).maxCoeff() < 3.0);
  CHECK(d.values.col(d.column("kappa1")).minCoeff() > 0.01);

  // lp column tracks the exact log posterior
  const ParameterTransform tf(spec, data.n_subjects());
  const long r = d.n_draws() - 1;
  const double exact = log_posterior_unconstrained(d.unconstrained.row(r).transpose(), data, spec);
  CHECK(std::abs(d.lp[r] - exact) <= 1e-6);
}

TEST_CASE("initialization failure reports the offending component") {
  // A dataset whose interval widths are zero-probability under any parameter
  // cannot initialize. (interval of measure ~0 far in the tail)
  std::vector<Observation> obs;
  for (int i = 0; i < 2; ++i) {
    Observation o;
    o.subject = i;
    o.time = 0.0;
    o.censor = CensorKind::interval;
    o.response = 1e30;
    o.upper = 1e30 + 1e-20;
    obs.push_back(o);
  }
  const Dataset data = Dataset::from_observations(std::move(obs));
  ModelSpec spec;
  spec.link.kind = LinkKind::linear;
  spec.kernel = Kernel::sl;
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.n_warmup = 10;
  cfg.n_keep = 10;
  CHECK_THROWS_WITH_AS(run_chains(data, spec, cfg), doctest::Contains("log-likelihood"),
                       std::runtime_error);
}

}  // TEST_SUITE
