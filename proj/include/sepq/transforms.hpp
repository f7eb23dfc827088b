#ifndef SEPQ_TRANSFORMS_HPP
#define SEPQ_TRANSFORMS_HPP

#include <string>
#include <vector>

#include "sepq/model.hpp"

namespace sepq {

/// Flattening of the model parameters into an unconstrained vector:
/// beta and gamma enter as-is, sigma and the L_v diagonal through logs,
/// the kappas through logs (half-t prior) or a scaled logit (uniform prior),
/// L_v off-diagonals as-is, then every subject's v_i stacked.
class ParameterTransform {
 public:
  ParameterTransform(const ModelSpec& spec, int n_subjects);

  int dim() const { return dim_; }
  int n_subjects() const { return n_subjects_; }
  int random_dim() const { return q_; }

  int beta_offset() const { return 0; }
  int n_beta() const { return n_beta_; }
  int gamma_index() const { return gamma_index_; }  // -1 when absent
  int sigma_index() const { return sigma_index_; }
  int kappa_offset() const { return kappa_offset_; }  // -1 when absent
  int n_kappa() const { return n_kappa_; }
  int lv_diag_offset() const { return lv_diag_offset_; }
  int lv_offdiag_offset() const { return lv_offdiag_offset_; }
  int n_lv_offdiag() const { return n_lv_offdiag_; }
  int v_offset(int subject) const { return v_offset_ + subject * q_; }

  /// Unconstrained -> constrained; adds the total log-Jacobian of the map to
  /// *log_jacobian when non-null.
  ModelParams constrain(const Eigen::VectorXd& x, double* log_jacobian = nullptr) const;
  Eigen::VectorXd unconstrain(const ModelParams& params) const;
  double log_jacobian(const Eigen::VectorXd& x) const;

  /// Constrained-scale flattening in the same layout (used for draw storage).
  Eigen::VectorXd pack(const ModelParams& params) const;
  ModelParams unpack(const Eigen::VectorXd& constrained) const;

  std::vector<std::string> names() const;

 private:
  ModelSpec spec_;
  int n_subjects_;
  int q_;
  int n_beta_;
  int gamma_index_;
  int sigma_index_;
  int kappa_offset_;
  int n_kappa_;
  int lv_diag_offset_;
  int lv_offdiag_offset_;
  int n_lv_offdiag_;
  int v_offset_;
  int dim_;
};

double log_posterior_unconstrained(const Eigen::VectorXd& x, const Dataset& data,
                                   const ModelSpec& spec);

}  // namespace sepq

#endif  // SEPQ_TRANSFORMS_HPP
