#include "sepq/fit.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sepq {

namespace {

const char* kernel_name(Kernel k) { return k == Kernel::sl ? "sl" : "sep"; }
const char* link_name(LinkKind k) { return k == LinkKind::linear ? "linear" : "biexponential"; }

nlohmann::json quantile_summary(const Eigen::VectorXd& col) {
  std::vector<double> v(col.data(), col.data() + col.size());
  nlohmann::json j;
  j["median"] = empirical_quantile(v, 0.5);
  j["lower95"] = empirical_quantile(v, 0.025);
  j["upper95"] = empirical_quantile(v, 0.975);
  j["mean"] = col.mean();
  return j;
}

}  // namespace

FitResult fit_model(std::shared_ptr<const Dataset> data, const FitConfig& cfg) {
  if (!data) throw std::invalid_argument("fit_model: null dataset");
  FitResult fit;
  fit.spec = cfg.spec;
  fit.chains = cfg.chains;
  fit.rhat_threshold = cfg.rhat_threshold;
  fit.data = data;
  fit.metadata = cfg.metadata;
  SampleResult result = run_chains(*data, cfg.spec, cfg.chains);
  fit.convergence = convergence_report(result, cfg.rhat_threshold);
  fit.draws = std::move(result.draws);
  return fit;
}

nlohmann::json convergence_json(const ConvergenceReport& rep) {
  nlohmann::json j;
  j["max_rhat"] = rep.max_rhat;
  j["rhat_threshold"] = rep.rhat_threshold;
  j["converged"] = rep.converged;
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    nlohmann::json p;
    if (rep.degenerate[i]) {
      p["degenerate"] = true;
    } else {
      p["rhat"] = rep.rhat[i];
      p["ess"] = rep.ess[i];
    }
    params[rep.names[i]] = std::move(p);
  }
  j["params"] = std::move(params);
  nlohmann::json acc = nlohmann::json::object();
  for (std::size_t b = 0; b < rep.block_names.size(); ++b)
    acc[rep.block_names[b]] = rep.accept_rate[b];
  j["acceptance"] = std::move(acc);
  return j;
}

nlohmann::json fit_summary_json(const FitResult& fit) {
  nlohmann::json j;
  j["kernel"] = kernel_name(fit.spec.kernel);
  j["link"] = link_name(fit.spec.link.kind);
  j["p0"] = fit.spec.p0;
  j["n_subjects"] = fit.data->n_subjects();
  j["n_obs"] = fit.data->n_obs();

  nlohmann::json params = nlohmann::json::object();
  for (std::size_t c = 0; c < fit.draws.names.size(); ++c) {
    const std::string& name = fit.draws.names[c];
    if (name.rfind("v[", 0) == 0) continue;  // subject-level effects stay in the draws CSV
    params[name] = quantile_summary(fit.draws.values.col(c));
  }
  j["params"] = std::move(params);
  j["convergence"] = convergence_json(fit.convergence);
  j["chains"] = {{"n_chains", fit.chains.n_chains}, {"warmup", fit.chains.n_warmup},
                 {"keep", fit.chains.n_keep},       {"thin", fit.chains.thin},
                 {"seed", fit.chains.seed}};
  if (!fit.metadata.is_null()) j["metadata"] = fit.metadata;
  return j;
}

void write_draws_csv(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "chain";
  for (const auto& name : draws.names) out << ',' << name;
  out << ",lp__\n";
  for (long r = 0; r < draws.values.rows(); ++r) {
    out << draws.chain[r] + 1;
    for (long c = 0; c < draws.values.cols(); ++c) out << ',' << draws.values(r, c);
    out << ',' << draws.lp[r] << "\n";
  }
}

std::function<double(const Eigen::VectorXd&)> log_posterior_fn(const FitResult& fit) {
  auto data = fit.data;
  auto spec = fit.spec;
  return [data, spec](const Eigen::VectorXd& x) {
    return log_posterior_unconstrained(x, *data, spec);
  };
}

void write_trajectory_csv(const FitResult& fit, const TrajectoryConfig& cfg,
                          const std::string& path) {
  if (cfg.n_points < 2) throw std::invalid_argument("trajectory needs at least 2 grid points");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(12);
  out << "time,median,lower95,upper95\n";

  const ParameterTransform tf(fit.spec, fit.data->n_subjects());
  const int q = fit.spec.link.random_dim();
  const Eigen::VectorXd v0 = Eigen::VectorXd::Zero(q);
  const long n_draws = fit.draws.n_draws();

  std::vector<double> curve(n_draws);
  for (int g = 0; g < cfg.n_points; ++g) {
    const double t = cfg.t_min + (cfg.t_max - cfg.t_min) * g / (cfg.n_points - 1);
    const double cd4 = cfg.cd4_baseline + cfg.cd4_slope * t;
    for (long r = 0; r < n_draws; ++r) {
      FixedEffects fx;
      fx.beta = fit.draws.values.row(r).segment(0, tf.n_beta()).transpose();
      fx.gamma = tf.gamma_index() >= 0 ? fit.draws.values(r, tf.gamma_index()) : 0.0;
      curve[r] = fit.spec.link.kind == LinkKind::linear
                     ? link_linear(t, fx, v0)
                     : link_biexponential(t, cd4, fx, v0);
    }
    out << t << ',' << empirical_quantile(curve, 0.5) << ','
        << empirical_quantile(curve, 0.025) << ',' << empirical_quantile(curve, 0.975) << "\n";
  }
}

void write_qq_csv(const ResidualReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(12);
  out << "expected,observed\n";
  for (const auto& [e, o] : report.test.qq) out << e << ',' << o << "\n";
}

nlohmann::json residual_summary_json(const ResidualReport& report, int n_sims) {
  nlohmann::json j;
  j["n_residuals"] = report.obs_index.size();
  j["n_sims"] = n_sims;
  j["ks_statistic"] = report.test.ks_statistic;
  j["p_value"] = report.test.p_value;
  return j;
}

}  // namespace sepq
