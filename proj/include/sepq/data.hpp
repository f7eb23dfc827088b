#ifndef SEPQ_DATA_HPP
#define SEPQ_DATA_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sepq {

enum class CensorKind { observed, left, right, interval };

/// One longitudinal record. `response` holds the measured value for observed
/// rows, the bound for left/right censoring, and the lower endpoint for
/// interval censoring (`upper` then holds the upper endpoint).
struct Observation {
  int subject = 0;
  double time = 0.0;
  double response = 0.0;
  double upper = 0.0;
  CensorKind censor = CensorKind::observed;
  std::vector<double> covariates;
};

/// Raised on malformed input files; `row` is the 1-based line number.
struct SchemaError : std::runtime_error {
  SchemaError(int row_, const std::string& what)
      : std::runtime_error("row " + std::to_string(row_) + ": " + what), row(row_) {}
  int row;
};

/// Raised when a file cannot be opened for reading or writing.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Longitudinal dataset grouped by subject. Subject indices are contiguous
/// from 0 and every subject has at least one observation.
class Dataset {
 public:
  Dataset() = default;
  static Dataset from_observations(std::vector<Observation> obs,
                                   std::vector<std::string> labels = {});

  // CSV schema (header required):
  //   subject_id,time,response,censor,bound2,cov1..covK
  // censor is one of obs|left|right|interval; bound2 is empty except for
  // interval rows, where response holds the lower bound and bound2 the upper.
  static Dataset read_csv(const std::string& path);
  void write_csv(const std::string& path) const;

  int n_subjects() const { return static_cast<int>(offsets_.size()) - 1; }
  int n_obs() const { return static_cast<int>(obs_.size()); }
  int n_covariates() const { return n_cov_; }
  const std::vector<Observation>& observations() const { return obs_; }
  std::vector<Observation>& observations() { return obs_; }

  /// Half-open range [first, last) of this subject's rows in observations().
  std::pair<int, int> subject_span(int subject) const {
    return {offsets_[subject], offsets_[subject + 1]};
  }
  const std::vector<std::string>& subject_labels() const { return labels_; }

 private:
  std::vector<Observation> obs_;
  std::vector<int> offsets_;
  std::vector<std::string> labels_;
  int n_cov_ = 0;
};

}  // namespace sepq

#endif  // SEPQ_DATA_HPP
