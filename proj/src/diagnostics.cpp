#include "sepq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sepq/rng.hpp"

namespace sepq {

Eigen::MatrixXd simulate_replicates(const PosteriorDraws& draws, const Dataset& data,
                                    const ModelSpec& spec, int n_sims, std::uint64_t seed) {
  if (draws.n_draws() < 1) throw std::invalid_argument("simulate_replicates: no draws");
  if (n_sims < 1) throw std::invalid_argument("simulate_replicates: n_sims must be positive");

  const ParameterTransform tf(spec, data.n_subjects());
  const int n_obs = data.n_obs();
  const int q = spec.link.random_dim();
  const int n_draws = draws.n_draws();
  Eigen::MatrixXd out(n_sims, n_obs);

  for (int s = 0; s < n_sims; ++s) {
    const int row = n_sims > 1
                        ? static_cast<int>(static_cast<long>(s) * (n_draws - 1) / (n_sims - 1))
                        : 0;
    const ModelParams p = tf.unpack(draws.values.row(row).transpose());
    const ResidualKernel kernel(p.err);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> gauss;

    // v ~ N(0, (L L^T)^{-1}): solve L^T v = z
    Eigen::MatrixXd v(data.n_subjects(), q);
    Eigen::VectorXd z(q);
    for (int i = 0; i < data.n_subjects(); ++i) {
      for (int k = 0; k < q; ++k) z[k] = gauss(rng);
      v.row(i) =
          p.Lv.transpose().triangularView<Eigen::Upper>().solve(z).transpose();
    }

    const auto& obs = data.observations();
    for (int r = 0; r < n_obs; ++r) {
      const double mu = link_eval(spec.link, obs[r], p.fx, v.row(obs[r].subject).transpose());
      out(s, r) = mu + kernel.sample(rng);
    }
  }
  return out;
}

Eigen::VectorXd scaled_residuals(const Eigen::VectorXd& observed,
                                 const Eigen::MatrixXd& replicates, Rng& rng) {
  if (observed.size() != replicates.cols())
    throw std::invalid_argument("scaled_residuals: replicate columns must match observations");
  const long n_sims = replicates.rows();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd r(observed.size());
  for (long j = 0; j < observed.size(); ++j) {
    long below = 0, ties = 0;
    for (long s = 0; s < n_sims; ++s) {
      if (replicates(s, j) < observed[j]) ++below;
      else if (replicates(s, j) == observed[j]) ++ties;
    }
    r[j] = (below + unif(rng) * (ties + 1)) / static_cast<double>(n_sims + 1);
  }
  return r;
}

UniformityTest uniformity_test(const Eigen::VectorXd& residuals) {
  const long n = residuals.size();
  if (n < 10) throw std::invalid_argument("uniformity_test needs at least 10 residuals");
  std::vector<double> sorted(residuals.data(), residuals.data() + n);
  std::sort(sorted.begin(), sorted.end());

  double d = 0.0;
  for (long k = 0; k < n; ++k) {
    d = std::max(d, (k + 1.0) / n - sorted[k]);
    d = std::max(d, sorted[k] - static_cast<double>(k) / n);
  }

  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * j * j * lambda * lambda);
    p += (j % 2 == 1 ? term : -term);
    if (term < 1e-12) break;
  }
  p = std::clamp(p, 0.0, 1.0);

  UniformityTest out;
  out.ks_statistic = d;
  out.p_value = p;
  out.qq.reserve(n);
  for (long k = 0; k < n; ++k)
    out.qq.emplace_back((k + 1.0) / (n + 1.0), sorted[k]);
  return out;
}

ResidualReport residual_report(const PosteriorDraws& draws, const Dataset& data,
                               const ModelSpec& spec, int n_sims, std::uint64_t seed) {
  const Eigen::MatrixXd reps = simulate_replicates(draws, data, spec, n_sims, seed);

  ResidualReport report;
  const auto& obs = data.observations();
  for (int r = 0; r < data.n_obs(); ++r)
    if (obs[r].censor == CensorKind::observed) report.obs_index.push_back(r);

  const long m = static_cast<long>(report.obs_index.size());
  Eigen::VectorXd observed(m);
  Eigen::MatrixXd sub(reps.rows(), m);
  for (long j = 0; j < m; ++j) {
    observed[j] = obs[report.obs_index[j]].response;
    sub.col(j) = reps.col(report.obs_index[j]);
  }

  Rng rng(mix_seed(seed, 0x5ca1ab1eULL));
  report.residuals = scaled_residuals(observed, sub, rng);
  report.test = uniformity_test(report.residuals);
  return report;
}

}  // namespace sepq
