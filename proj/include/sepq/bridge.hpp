#ifndef SEPQ_BRIDGE_HPP
#define SEPQ_BRIDGE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "sepq/mcmc.hpp"

namespace sepq {

/// Multivariate normal proposal in the unconstrained space.
struct ProposalDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;  // lower Cholesky factor of the covariance
  double log_norm = 0.0; // -(d/2) ln(2 pi) - sum(ln diag(chol))
  bool jittered = false;

  double logpdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;
};

/// Moment-matched normal proposal. Adds an escalating diagonal jitter when
/// the sample covariance is not positive definite (flagged in the result).
ProposalDist fit_proposal(const Eigen::MatrixXd& draws);

struct BridgeResult {
  double log_ml = 0.0;
  int iterations = 0;
  bool converged = false;
  int n_posterior_draws = 0;
  int n_proposal_draws = 0;
};

/// Iterative optimal-bridge estimate of the log normalizing constant of
/// exp(log_post). log_post must be the unnormalized log posterior on the
/// unconstrained scale, Jacobian included. All ratio arithmetic is shifted
/// by the median posterior log-ratio so nothing overflows.
BridgeResult bridge_log_ml(const Eigen::MatrixXd& posterior_half, const ProposalDist& proposal,
                           const std::function<double(const Eigen::VectorXd&)>& log_post,
                           double tol, int max_iter, Rng& rng, int n_proposal_draws = -1);

struct BridgeConfig {
  double tol = 1e-10;
  int max_iter = 1000;
  std::uint64_t seed = 20260809;
  int n_proposal_draws = -1;  // -1: match the posterior half
};

/// Split-half discipline: the proposal is fitted to the first half of the
/// draws, the bridge iterates over the second half only.
BridgeResult estimate_log_ml(const PosteriorDraws& draws,
                             const std::function<double(const Eigen::VectorXd&)>& log_post,
                             const BridgeConfig& cfg);

}  // namespace sepq

#endif  // SEPQ_BRIDGE_HPP
