#ifndef SEPQ_FIT_HPP
#define SEPQ_FIT_HPP

#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "sepq/bridge.hpp"
#include "sepq/diagnostics.hpp"
#include "sepq/mcmc.hpp"

namespace sepq {

struct FitConfig {
  ModelSpec spec;
  ChainConfig chains;
  double rhat_threshold = 1.05;
  nlohmann::json metadata;  // echoed verbatim into the summary (e.g. applied scalings)
};

struct FitResult {
  ModelSpec spec;
  ChainConfig chains;
  double rhat_threshold = 1.05;
  PosteriorDraws draws;
  ConvergenceReport convergence;
  std::shared_ptr<const Dataset> data;
  nlohmann::json metadata;
};

FitResult fit_model(std::shared_ptr<const Dataset> data, const FitConfig& cfg);

/// Posterior medians and central 95% intervals for the population-level
/// parameters, plus the convergence report and run settings.
nlohmann::json fit_summary_json(const FitResult& fit);
nlohmann::json convergence_json(const ConvergenceReport& rep);

/// Columnar draws CSV: chain,beta[1],...,sigma,...,v[i,k],...,lp__
void write_draws_csv(const PosteriorDraws& draws, const std::string& path);

/// Unnormalized log posterior (unconstrained scale, Jacobian included) bound
/// to this fit's data and model; the bridge-sampling integrand.
std::function<double(const Eigen::VectorXd&)> log_posterior_fn(const FitResult& fit);

struct TrajectoryConfig {
  double t_min = 0.0;
  double t_max = 1.0;
  int n_points = 101;
  double cd4_baseline = 0.0;  // reference covariate trajectory cd4(t) = baseline + slope*t
  double cd4_slope = 0.0;
};

/// Population curve: link evaluated with v = 0 per posterior draw over a time
/// grid; emits pointwise median and 95% band as time,median,lower95,upper95.
void write_trajectory_csv(const FitResult& fit, const TrajectoryConfig& cfg,
                          const std::string& path);

/// QQ points as expected,observed rows.
void write_qq_csv(const ResidualReport& report, const std::string& path);
nlohmann::json residual_summary_json(const ResidualReport& report, int n_sims);

}  // namespace sepq

#endif  // SEPQ_FIT_HPP
