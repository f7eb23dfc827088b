#ifndef SEPQ_MCMC_HPP
#define SEPQ_MCMC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepq/model.hpp"
#include "sepq/transforms.hpp"

namespace sepq {

struct BlockSpec {
  std::string name;
  int offset = 0;
  int size = 1;
};

/// Target density on an unconstrained space, partitioned into update blocks.
/// block_conditional(x, b) must return the sum of every log-density term that
/// depends on block b's coordinates; the default full evaluation is always
/// valid, just slower.
class McmcTarget {
 public:
  virtual ~McmcTarget() = default;
  virtual int dim() const = 0;
  virtual const std::vector<BlockSpec>& blocks() const = 0;
  virtual double log_density(const Eigen::VectorXd& x) const = 0;
  virtual double block_conditional(const Eigen::VectorXd& x, int /*block*/) const {
    return log_density(x);
  }
};

struct ChainConfig {
  int n_chains = 4;
  int n_warmup = 5000;
  int n_keep = 5000;
  int thin = 1;
  std::uint64_t seed = 20260809;
  double target_accept_multi = 0.234;
  double target_accept_scalar = 0.44;
  double init_step = 0.1;    // initial proposal sd before covariance adaptation
  double init_jitter = 0.05; // sd of the per-chain start perturbation
  int n_threads = 0;         // 0 = hardware concurrency
};

/// Retained draws on the sampler's (unconstrained) scale, chain-major order.
struct RawDraws {
  Eigen::MatrixXd x;
  Eigen::VectorXd lp;
  std::vector<int> chain;
  int n_chains = 1;
  int n_keep = 0;
  std::vector<std::string> block_names;
  std::vector<double> accept_rate;  // post-warmup, averaged over chains
};

/// Adaptive random-walk Metropolis-within-Gibbs. Proposal covariances and
/// Robbins-Monro scale factors adapt during warmup only; the retained chain
/// runs a frozen kernel. Deterministic given (target, init, cfg.seed).
RawDraws run_mcmc(const McmcTarget& target, const Eigen::VectorXd& init, const ChainConfig& cfg);

/// Retained draws of the hierarchical model on the constrained scale.
struct PosteriorDraws {
  std::vector<std::string> names;
  Eigen::MatrixXd values;         // constrained scale
  Eigen::MatrixXd unconstrained;  // sampler scale (bridge sampling input)
  Eigen::VectorXd lp;             // unnormalized log posterior, sampler scale
  std::vector<int> chain;
  int n_chains = 1;
  int n_keep = 0;

  int column(const std::string& name) const;  // -1 if absent
  int n_draws() const { return static_cast<int>(values.rows()); }
};

struct SampleResult {
  PosteriorDraws draws;
  std::vector<std::string> block_names;
  std::vector<double> accept_rate;
};

/// Fits the censored quantile mixed model by MCMC: crude least-squares start,
/// per-subject random-effect blocks, joint fixed-effect / error-parameter /
/// Cholesky blocks.
SampleResult run_chains(const Dataset& data, const ModelSpec& spec, const ChainConfig& cfg);

/// Split-chain potential scale reduction factor. values must be chain-major
/// with equal draws per chain. nullopt flags a zero-variance (degenerate) case.
std::optional<double> split_rhat(const Eigen::VectorXd& values, int n_chains);

/// Autocorrelation-based effective sample size (Geyer initial-monotone
/// truncation, chains combined). nullopt flags zero variance.
std::optional<double> effective_sample_size(const Eigen::VectorXd& values, int n_chains);

std::optional<double> rhat(const PosteriorDraws& draws, const std::string& param);
std::optional<double> effective_sample_size(const PosteriorDraws& draws, const std::string& param);

struct ConvergenceReport {
  std::vector<std::string> names;
  std::vector<double> rhat;  // NaN where degenerate
  std::vector<double> ess;
  std::vector<bool> degenerate;
  std::vector<std::string> block_names;
  std::vector<double> accept_rate;
  double max_rhat = 0.0;
  double rhat_threshold = 1.05;
  bool converged = false;
};

ConvergenceReport convergence_report(const SampleResult& result, double rhat_threshold);

/// Type-7 interpolated empirical quantile (the convention used throughout).
double empirical_quantile(std::vector<double> values, double q);

}  // namespace sepq

#endif  // SEPQ_MCMC_HPP
