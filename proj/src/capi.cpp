#include "sepq/sepq.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "sepq/fit.hpp"
#include "sepq/simstudy.hpp"

using nlohmann::json;

struct sepq_dataset {
  sepq::Dataset data;
};

struct sepq_fit {
  sepq::FitResult result;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
sepq_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const sepq::SchemaError& e) {
    g_last_error = e.what();
    return SEPQ_ERR_SCHEMA;
  } catch (const sepq::IoError& e) {
    g_last_error = e.what();
    return SEPQ_ERR_IO;
  } catch (const json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return SEPQ_ERR_INVALID;
  } catch (const std::domain_error& e) {
    g_last_error = e.what();
    return SEPQ_ERR_INVALID;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return SEPQ_ERR_INVALID;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEPQ_ERR_NUMERIC;
  }
}

json parse_config(const char* text) {
  if (!text || !*text) return json::object();
  return json::parse(text);
}

sepq::ModelSpec spec_from_json(const json& j) {
  sepq::ModelSpec spec;
  const std::string kernel = j.value("kernel", "sep");
  if (kernel == "sl") spec.kernel = sepq::Kernel::sl;
  else if (kernel == "sep") spec.kernel = sepq::Kernel::sep;
  else throw std::invalid_argument("config: kernel must be 'sl' or 'sep'");

  spec.p0 = j.value("p0", 0.5);
  const std::string link = j.value("link", "linear");
  if (link == "linear") spec.link.kind = sepq::LinkKind::linear;
  else if (link == "biexponential") spec.link.kind = sepq::LinkKind::biexponential;
  else throw std::invalid_argument("config: link must be 'linear' or 'biexponential'");
  spec.link.cd4_index = j.value("cd4_index", 0);

  if (j.contains("priors")) {
    const json& p = j["priors"];
    spec.priors.beta_variance = p.value("beta_variance", spec.priors.beta_variance);
    spec.priors.offdiag_variance = p.value("offdiag_variance", spec.priors.offdiag_variance);
    spec.priors.half_t_nu = p.value("half_t_nu", spec.priors.half_t_nu);
    spec.priors.half_t_scale = p.value("half_t_scale", spec.priors.half_t_scale);
    const std::string kp = p.value("kappa_prior", "half_t");
    if (kp == "half_t") spec.priors.kappa_prior = sepq::KappaPriorKind::half_t;
    else if (kp == "uniform") spec.priors.kappa_prior = sepq::KappaPriorKind::uniform;
    else throw std::invalid_argument("config: kappa_prior must be 'half_t' or 'uniform'");
    spec.priors.kappa_lo = p.value("kappa_lo", spec.priors.kappa_lo);
    spec.priors.kappa_hi = p.value("kappa_hi", spec.priors.kappa_hi);
  }
  return spec;
}

sepq::ChainConfig chains_from_json(const json& j) {
  sepq::ChainConfig cfg;
  if (!j.contains("chains")) return cfg;
  const json& c = j["chains"];
  cfg.n_chains = c.value("n_chains", cfg.n_chains);
  cfg.n_warmup = c.value("warmup", cfg.n_warmup);
  cfg.n_keep = c.value("keep", cfg.n_keep);
  cfg.thin = c.value("thin", cfg.thin);
  cfg.seed = c.value("seed", cfg.seed);
  cfg.n_threads = c.value("workers", cfg.n_threads);
  return cfg;
}

sepq::SimScenario scenario_from_json(const json& j) {
  sepq::SimScenario s;
  s.censor_frac = j.value("censor_frac", s.censor_frac);
  s.p0 = j.value("p0", s.p0);
  s.kappa1 = j.value("kappa1", s.kappa1);
  s.kappa2 = j.value("kappa2", s.kappa2);
  s.n_subjects = j.value("n_subjects", s.n_subjects);
  s.sigma = j.value("sigma", s.sigma);
  if (j.contains("times")) s.times = j["times"].get<std::vector<double>>();
  if (j.contains("beta")) {
    const auto b = j["beta"].get<std::vector<double>>();
    if (b.size() != 2) throw std::invalid_argument("scenario: beta must have 2 entries");
    s.beta = Eigen::Vector2d(b[0], b[1]);
  }
  if (j.contains("re_sd")) {
    const auto d = j["re_sd"].get<std::vector<double>>();
    if (d.size() != 2) throw std::invalid_argument("scenario: re_sd must have 2 entries");
    s.re_chol = (Eigen::Matrix2d() << d[0], 0.0, 0.0, d[1]).finished();
  }
  return s;
}

}  // namespace

extern "C" {

const char* sepq_last_error(void) { return g_last_error.c_str(); }

void sepq_string_free(char* s) { std::free(s); }

sepq_status sepq_dataset_read_csv(const char* path, sepq_dataset** out) {
  return guarded([&]() -> sepq_status {
    if (!path || !out) throw std::invalid_argument("null argument");
    auto ds = std::make_unique<sepq_dataset>();
    ds->data = sepq::Dataset::read_csv(path);
    *out = ds.release();
    return SEPQ_OK;
  });
}

sepq_status sepq_dataset_write_csv(const sepq_dataset* ds, const char* path) {
  return guarded([&]() -> sepq_status {
    if (!ds || !path) throw std::invalid_argument("null argument");
    ds->data.write_csv(path);
    return SEPQ_OK;
  });
}

sepq_status sepq_dataset_simulate(const char* scenario_json, sepq_dataset** out) {
  return guarded([&]() -> sepq_status {
    if (!out) throw std::invalid_argument("null argument");
    const json j = parse_config(scenario_json);
    const sepq::SimScenario s = scenario_from_json(j);
    const std::uint64_t seed = j.value("seed", static_cast<std::uint64_t>(20260809));
    sepq::Dataset data = sepq::generate_dataset(s, seed);
    if (s.censor_frac > 0.0) data = sepq::apply_censoring(data, s.censor_frac);
    auto ds = std::make_unique<sepq_dataset>();
    ds->data = std::move(data);
    *out = ds.release();
    return SEPQ_OK;
  });
}

sepq_status sepq_dataset_rescale(sepq_dataset* ds, const char* transform_json) {
  return guarded([&]() -> sepq_status {
    if (!ds) throw std::invalid_argument("null argument");
    const json j = parse_config(transform_json);
    const double tc = j.value("time_center", 0.0);
    const double tsc = j.value("time_scale", 1.0);
    if (tsc == 0.0) throw std::invalid_argument("time_scale must be nonzero");
    struct CovTf {
      int index;
      double center, scale;
    };
    std::vector<CovTf> cov_tfs;
    if (j.contains("covariate_transforms")) {
      for (const auto& c : j["covariate_transforms"]) {
        CovTf tf{c.value("index", 0), c.value("center", 0.0), c.value("scale", 1.0)};
        if (tf.scale == 0.0) throw std::invalid_argument("covariate scale must be nonzero");
        cov_tfs.push_back(tf);
      }
    }
    for (auto& o : ds->data.observations()) {
      o.time = (o.time - tc) / tsc;
      for (const auto& tf : cov_tfs) {
        if (tf.index < 0 || tf.index >= static_cast<int>(o.covariates.size()))
          throw std::invalid_argument("covariate transform index out of range");
        o.covariates[tf.index] = (o.covariates[tf.index] - tf.center) / tf.scale;
      }
    }
    return SEPQ_OK;
  });
}

int sepq_dataset_n_subjects(const sepq_dataset* ds) { return ds ? ds->data.n_subjects() : 0; }
int sepq_dataset_n_obs(const sepq_dataset* ds) { return ds ? ds->data.n_obs() : 0; }

sepq_status sepq_dataset_time_range(const sepq_dataset* ds, double* t_min, double* t_max) {
  return guarded([&]() -> sepq_status {
    if (!ds || !t_min || !t_max) throw std::invalid_argument("null argument");
    double lo = ds->data.observations().front().time, hi = lo;
    for (const auto& o : ds->data.observations()) {
      lo = std::min(lo, o.time);
      hi = std::max(hi, o.time);
    }
    *t_min = lo;
    *t_max = hi;
    return SEPQ_OK;
  });
}

void sepq_dataset_free(sepq_dataset* ds) { delete ds; }

sepq_status sepq_fit_run(const sepq_dataset* ds, const char* config_json, sepq_fit** out) {
  return guarded([&]() -> sepq_status {
    if (!ds || !out) throw std::invalid_argument("null argument");
    const json j = parse_config(config_json);
    sepq::FitConfig cfg;
    cfg.spec = spec_from_json(j);
    cfg.chains = chains_from_json(j);
    cfg.rhat_threshold = j.value("rhat_threshold", cfg.rhat_threshold);
    if (j.contains("metadata")) cfg.metadata = j["metadata"];
    auto fit = std::make_unique<sepq_fit>();
    fit->result = sepq::fit_model(std::make_shared<sepq::Dataset>(ds->data), cfg);
    const bool converged = fit->result.convergence.converged;
    *out = fit.release();
    return converged ? SEPQ_OK : SEPQ_WARN_CONVERGENCE;
  });
}

int sepq_fit_converged(const sepq_fit* fit) {
  return fit && fit->result.convergence.converged ? 1 : 0;
}

sepq_status sepq_fit_summary_json(const sepq_fit* fit, char** json_out) {
  return guarded([&]() -> sepq_status {
    if (!fit || !json_out) throw std::invalid_argument("null argument");
    *json_out = dup_string(sepq::fit_summary_json(fit->result).dump(2));
    return SEPQ_OK;
  });
}

sepq_status sepq_fit_write_draws_csv(const sepq_fit* fit, const char* path) {
  return guarded([&]() -> sepq_status {
    if (!fit || !path) throw std::invalid_argument("null argument");
    sepq::write_draws_csv(fit->result.draws, path);
    return SEPQ_OK;
  });
}

sepq_status sepq_fit_log_marginal(const sepq_fit* fit, const char* config_json, char** json_out) {
  return guarded([&]() -> sepq_status {
    if (!fit || !json_out) throw std::invalid_argument("null argument");
    const json j = parse_config(config_json);
    sepq::BridgeConfig cfg;
    cfg.tol = j.value("tol", cfg.tol);
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_proposal_draws = j.value("n_proposal_draws", cfg.n_proposal_draws);
    const sepq::BridgeResult r =
        sepq::estimate_log_ml(fit->result.draws, sepq::log_posterior_fn(fit->result), cfg);
    json out;
    out["log_ml"] = r.log_ml;
    out["iterations"] = r.iterations;
    out["converged"] = r.converged;
    out["n_posterior_draws"] = r.n_posterior_draws;
    out["n_proposal_draws"] = r.n_proposal_draws;
    *json_out = dup_string(out.dump(2));
    return r.converged ? SEPQ_OK : SEPQ_WARN_CONVERGENCE;
  });
}

sepq_status sepq_fit_residuals(const sepq_fit* fit, const char* config_json,
                               const char* qq_csv_path, char** json_out) {
  return guarded([&]() -> sepq_status {
    if (!fit || !json_out) throw std::invalid_argument("null argument");
    const json j = parse_config(config_json);
    const int n_sims = j.value("n_sims", 250);
    const std::uint64_t seed = j.value("seed", static_cast<std::uint64_t>(20260809));
    const sepq::ResidualReport report = sepq::residual_report(
        fit->result.draws, *fit->result.data, fit->result.spec, n_sims, seed);
    if (qq_csv_path) sepq::write_qq_csv(report, qq_csv_path);
    *json_out = dup_string(sepq::residual_summary_json(report, n_sims).dump(2));
    return SEPQ_OK;
  });
}

sepq_status sepq_fit_trajectory(const sepq_fit* fit, const char* config_json,
                                const char* csv_path) {
  return guarded([&]() -> sepq_status {
    if (!fit || !csv_path) throw std::invalid_argument("null argument");
    const json j = parse_config(config_json);
    sepq::TrajectoryConfig cfg;
    cfg.t_min = j.value("t_min", cfg.t_min);
    cfg.t_max = j.value("t_max", cfg.t_max);
    cfg.n_points = j.value("n_points", cfg.n_points);
    cfg.cd4_baseline = j.value("cd4_baseline", cfg.cd4_baseline);
    cfg.cd4_slope = j.value("cd4_slope", cfg.cd4_slope);
    sepq::write_trajectory_csv(fit->result, cfg, csv_path);
    return SEPQ_OK;
  });
}

void sepq_fit_free(sepq_fit* fit) { delete fit; }

sepq_status sepq_simstudy_run(const char* config_json, const char* out_csv, char** json_out) {
  return guarded([&]() -> sepq_status {
    const json j = parse_config(config_json);

    sepq::SimStudyConfig cfg;
    cfg.n_reps = j.value("n_reps", cfg.n_reps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.chains = chains_from_json(j);
    cfg.rhat_threshold = j.value("rhat_threshold", cfg.rhat_threshold);
    cfg.n_threads = j.value("workers", cfg.n_threads);
    const std::string models = j.value("models", "both");
    cfg.fit_sl = models == "both" || models == "sl";
    cfg.fit_sep = models == "both" || models == "sep";

    std::vector<sepq::SimScenario> scenarios;
    if (j.contains("scenarios")) {
      for (const auto& sj : j["scenarios"]) {
        json merged = j;
        merged.erase("scenarios");
        merged.update(sj);
        scenarios.push_back(scenario_from_json(merged));
      }
    } else {
      // The full grid: 2 censoring levels x 2 quantiles x 3 tail settings.
      for (double c : {0.05, 0.10})
        for (double p0 : {0.5, 0.8})
          for (auto [k1, k2] : {std::pair{2.0, 0.5}, {1.0, 1.0}, {0.5, 2.0}}) {
            json sj = j;
            sj["censor_frac"] = c;
            sj["p0"] = p0;
            sj["kappa1"] = k1;
            sj["kappa2"] = k2;
            scenarios.push_back(scenario_from_json(sj));
          }
    }

    json table = json::array();
    std::string csv =
        "cen,p0,kappa1,kappa2,param,true,"
        "skl_bias,skl_rmse,skl_len,skl_cp,sep_bias,sep_rmse,sep_len,sep_cp,"
        "n_reps,skl_excluded,sep_excluded\n";
    for (const auto& s : scenarios) {
      const auto rows = sepq::run_scenario(s, cfg);
      for (const std::string param : {"beta1", "beta2"}) {
        const sepq::MetricsRow* skl = nullptr;
        const sepq::MetricsRow* sep = nullptr;
        for (const auto& r : rows) {
          if (r.param != param) continue;
          (r.model == "SKL" ? skl : sep) = &r;
        }
        json row;
        row["cen"] = s.censor_frac;
        row["p0"] = s.p0;
        row["kappa1"] = s.kappa1;
        row["kappa2"] = s.kappa2;
        row["param"] = param;
        row["true"] = param == "beta1" ? s.beta[0] : s.beta[1];
        char buf[512];
        std::snprintf(buf, sizeof(buf), "%.4g,%.4g,%.4g,%.4g,%s,%.4g", s.censor_frac, s.p0,
                      s.kappa1, s.kappa2, param.c_str(),
                      param == "beta1" ? s.beta[0] : s.beta[1]);
        csv += buf;
        const sepq::MetricsRow* models_out[2] = {skl, sep};
        const char* keys[2] = {"skl", "sep"};
        for (int mi = 0; mi < 2; ++mi) {
          const sepq::MetricsRow* m = models_out[mi];
          const char* key = keys[mi];
          if (m) {
            row[std::string(key) + "_bias"] = m->bias;
            row[std::string(key) + "_rmse"] = m->rmse;
            row[std::string(key) + "_len"] = m->len;
            row[std::string(key) + "_cp"] = m->cp;
            std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.4f", m->bias, m->rmse, m->len,
                          m->cp);
            csv += buf;
          } else {
            csv += ",,,,";
          }
        }
        std::snprintf(buf, sizeof(buf), ",%d,%d,%d\n", cfg.n_reps,
                      skl ? skl->n_excluded : 0, sep ? sep->n_excluded : 0);
        csv += buf;
        table.push_back(std::move(row));
      }
    }

    if (out_csv) {
      std::ofstream fout(out_csv);
      if (!fout) throw sepq::IoError(std::string("cannot open '") + out_csv + "' for writing");
      fout << csv;
    }
    if (json_out) *json_out = dup_string(table.dump(2));
    return SEPQ_OK;
  });
}

}  // extern "C"
