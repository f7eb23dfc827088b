#ifndef SEPQ_DIAGNOSTICS_HPP
#define SEPQ_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "sepq/mcmc.hpp"

namespace sepq {

/// Posterior-predictive replicate matrix (n_sims x n_obs). Each replicate row
/// picks an evenly thinned posterior draw, samples fresh random effects from
/// that draw's Sigma_v, evaluates the link, and samples outcomes from the
/// draw's error kernel. Censored rows are simulated like any other; callers
/// exclude them downstream.
Eigen::MatrixXd simulate_replicates(const PosteriorDraws& draws, const Dataset& data,
                                    const ModelSpec& spec, int n_sims, std::uint64_t seed);

/// Randomized PIT: r = (#{sim < y} + U * (#{sim = y} + 1)) / (n_sims + 1)
/// with one fresh U ~ Uniform(0,1) per observation.
Eigen::VectorXd scaled_residuals(const Eigen::VectorXd& observed,
                                 const Eigen::MatrixXd& replicates, Rng& rng);

struct UniformityTest {
  double ks_statistic = 0.0;
  double p_value = 1.0;
  std::vector<std::pair<double, double>> qq;  // (uniform quantile, sorted residual)
};

/// One-sample Kolmogorov-Smirnov test against Uniform(0,1) with the
/// asymptotic p-value; QQ points are (k/(n+1), r_(k)).
UniformityTest uniformity_test(const Eigen::VectorXd& residuals);

struct ResidualReport {
  std::vector<int> obs_index;  // rows of the dataset that contributed (uncensored)
  Eigen::VectorXd residuals;
  UniformityTest test;
};

/// Full pipeline on the uncensored rows only.
ResidualReport residual_report(const PosteriorDraws& draws, const Dataset& data,
                               const ModelSpec& spec, int n_sims, std::uint64_t seed);

}  // namespace sepq

#endif  // SEPQ_DIAGNOSTICS_HPP
