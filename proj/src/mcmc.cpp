#include "sepq/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sepq/rng.hpp"

namespace sepq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct BlockState {
  int offset = 0;
  int d = 1;
  double target = 0.234;
  double log_scale = 0.0;
  long adapt_count = 0;
  // Welford accumulators for the warmup sample covariance
  long count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd m2;
  Eigen::MatrixXd chol;  // proposal shape factor, lower triangular
  long accepts = 0;
  long proposals = 0;
};

struct ChainOutput {
  Eigen::MatrixXd x;
  Eigen::VectorXd lp;
  std::vector<long> accepts;
  std::vector<long> proposals;
};

ChainOutput run_chain(const McmcTarget& target, const Eigen::VectorXd& init,
                      const ChainConfig& cfg, std::uint64_t seed) {
  const int dim = target.dim();
  const auto& blocks = target.blocks();
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Perturbed start; the final attempt falls back to the exact init point.
  Eigen::VectorXd x = init;
  double lp = kNegInf;
  double jitter = cfg.init_jitter;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::VectorXd cand = init;
    if (attempt < 11) {
      for (int i = 0; i < dim; ++i) cand[i] += jitter * gauss(rng);
    }
    const double ld = target.log_density(cand);
    if (std::isfinite(ld)) {
      x = cand;
      lp = ld;
      break;
    }
    jitter *= 0.5;
  }
  if (!std::isfinite(lp))
    throw std::runtime_error("MCMC initialization failed: log density is not finite at the start point");

  std::vector<BlockState> state(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    BlockState& s = state[b];
    s.offset = blocks[b].offset;
    s.d = blocks[b].size;
    s.target = s.d > 1 ? cfg.target_accept_multi : cfg.target_accept_scalar;
    s.mean = Eigen::VectorXd::Zero(s.d);
    s.m2 = Eigen::MatrixXd::Zero(s.d, s.d);
    s.chol = cfg.init_step * Eigen::MatrixXd::Identity(s.d, s.d);
  }

  const int total = cfg.n_warmup + cfg.n_keep * cfg.thin;
  ChainOutput out;
  out.x.resize(cfg.n_keep, dim);
  out.lp.resize(cfg.n_keep);
  int kept = 0;

  Eigen::VectorXd z, dx, saved;
  for (int iter = 0; iter < total; ++iter) {
    const bool warm = iter < cfg.n_warmup;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      BlockState& s = state[b];
      const double la = target.block_conditional(x, static_cast<int>(b));

      z.resize(s.d);
      for (int i = 0; i < s.d; ++i) z[i] = gauss(rng);
      const double lam = std::exp(s.log_scale) * 2.38 / std::sqrt(static_cast<double>(s.d));
      dx.noalias() = s.chol.triangularView<Eigen::Lower>() * z;
      dx *= lam;

      saved = x.segment(s.offset, s.d);
      x.segment(s.offset, s.d) += dx;
      const double lb = target.block_conditional(x, static_cast<int>(b));

      double alpha;
      if (lb == kNegInf) alpha = 0.0;
      else if (la == kNegInf) alpha = 1.0;
      else alpha = std::exp(std::min(0.0, lb - la));

      const bool accept = unif(rng) < alpha;
      if (accept) {
        if (la == kNegInf || lb == kNegInf) lp = target.log_density(x);
        else lp += lb - la;
      } else {
        x.segment(s.offset, s.d) = saved;
      }

      if (warm) {
        s.adapt_count++;
        const double eta = std::pow(static_cast<double>(s.adapt_count), -0.6);
        s.log_scale += eta * (alpha - s.target);
        s.log_scale = std::clamp(s.log_scale, -8.0, 8.0);

        s.count++;
        Eigen::VectorXd cur = x.segment(s.offset, s.d);
        Eigen::VectorXd delta = cur - s.mean;
        s.mean += delta / static_cast<double>(s.count);
        s.m2.noalias() += delta * (cur - s.mean).transpose();
        if (s.count >= std::max<long>(50, 10L * s.d) && (iter + 1) % 100 == 0) {
          Eigen::MatrixXd cov = s.m2 / static_cast<double>(s.count - 1);
          const double ridge = 1e-6 * cov.trace() / s.d + 1e-12;
          cov.diagonal().array() += ridge;
          Eigen::LLT<Eigen::MatrixXd> llt(cov);
          if (llt.info() == Eigen::Success) s.chol = llt.matrixL();
        }
      } else {
        s.proposals++;
        if (accept) s.accepts++;
      }
    }

    if (!warm && (iter - cfg.n_warmup) % cfg.thin == 0) {
      if (kept % 512 == 0) lp = target.log_density(x);  // kill float drift
      out.x.row(kept) = x;
      out.lp[kept] = lp;
      ++kept;
    }
  }

  out.accepts.reserve(blocks.size());
  out.proposals.reserve(blocks.size());
  for (const auto& s : state) {
    out.accepts.push_back(s.accepts);
    out.proposals.push_back(s.proposals);
  }
  return out;
}

}  // namespace

RawDraws run_mcmc(const McmcTarget& target, const Eigen::VectorXd& init, const ChainConfig& cfg) {
  if (cfg.n_chains < 1 || cfg.n_keep < 1 || cfg.thin < 1 || cfg.n_warmup < 0)
    throw std::invalid_argument("invalid chain configuration");
  if (init.size() != target.dim())
    throw std::invalid_argument("init point has wrong dimension");

  const int dim = target.dim();
  std::vector<ChainOutput> per_chain(cfg.n_chains);
  parallel_for(cfg.n_chains, cfg.n_threads, [&](int c) {
    per_chain[c] = run_chain(target, init, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(c)));
  });

  RawDraws out;
  out.n_chains = cfg.n_chains;
  out.n_keep = cfg.n_keep;
  out.x.resize(static_cast<long>(cfg.n_chains) * cfg.n_keep, dim);
  out.lp.resize(static_cast<long>(cfg.n_chains) * cfg.n_keep);
  out.chain.resize(static_cast<std::size_t>(cfg.n_chains) * cfg.n_keep);
  for (int c = 0; c < cfg.n_chains; ++c) {
    out.x.middleRows(static_cast<long>(c) * cfg.n_keep, cfg.n_keep) = per_chain[c].x;
    out.lp.segment(static_cast<long>(c) * cfg.n_keep, cfg.n_keep) = per_chain[c].lp;
    std::fill_n(out.chain.begin() + static_cast<long>(c) * cfg.n_keep, cfg.n_keep, c);
  }

  const auto& blocks = target.blocks();
  out.block_names.reserve(blocks.size());
  out.accept_rate.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    long acc = 0, prop = 0;
    for (const auto& ch : per_chain) {
      acc += ch.accepts[b];
      prop += ch.proposals[b];
    }
    out.block_names.push_back(blocks[b].name);
    out.accept_rate.push_back(prop > 0 ? static_cast<double>(acc) / prop : 0.0);
  }
  return out;
}

int PosteriorDraws::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

// Blocks: fixed effects jointly, error parameters jointly, the Cholesky
// factor jointly, then one block per subject's random effects.
class ModelTarget : public McmcTarget {
 public:
  ModelTarget(const Dataset& data, const ModelSpec& spec)
      : data_(data), spec_(spec), tf_(spec, data.n_subjects()) {
    const int fixed_size = tf_.n_beta() + (tf_.gamma_index() >= 0 ? 1 : 0);
    blocks_.push_back({"fixed", tf_.beta_offset(), fixed_size});
    blocks_.push_back({"error", tf_.sigma_index(), 1 + tf_.n_kappa()});
    blocks_.push_back({"chol", tf_.lv_diag_offset(), tf_.random_dim() + tf_.n_lv_offdiag()});
    for (int i = 0; i < data.n_subjects(); ++i)
      blocks_.push_back({"v[" + std::to_string(i + 1) + "]", tf_.v_offset(i), tf_.random_dim()});
  }

  const ParameterTransform& transform() const { return tf_; }

  int dim() const override { return tf_.dim(); }
  const std::vector<BlockSpec>& blocks() const override { return blocks_; }

  double log_density(const Eigen::VectorXd& x) const override {
    double lj = 0.0;
    const ModelParams p = tf_.constrain(x, &lj);
    const double prior = log_prior(p, spec_, data_.n_subjects());
    if (prior == kNegInf) return kNegInf;
    const double total = log_likelihood(data_, p, spec_) + prior + lj;
    if (std::isnan(total)) throw std::runtime_error("log-posterior evaluated to NaN");
    return total;
  }

  double block_conditional(const Eigen::VectorXd& x, int block) const override {
    const ModelParams p = tf_.constrain(x);
    double out;
    if (block == 0) {
      out = log_likelihood(data_, p, spec_) + log_prior_fixed(p, spec_);
    } else if (block == 1) {
      double jac = x[tf_.sigma_index()];
      if (tf_.n_kappa() > 0) jac += kappa_jacobian(x);
      const double prior = log_prior_error(p, spec_);
      out = prior == kNegInf ? kNegInf : log_likelihood(data_, p, spec_) + prior + jac;
    } else if (block == 2) {
      double jac = 0.0;
      for (int j = 0; j < tf_.random_dim(); ++j) jac += x[tf_.lv_diag_offset() + j];
      const RandomEffectsSpec re{tf_.random_dim(), p.Lv};
      double re_sum = 0.0;
      for (int i = 0; i < data_.n_subjects(); ++i)
        re_sum += random_effects_logdensity(p.v.row(i), re);
      out = re_sum + log_prior_chol(p, spec_) + jac;
    } else {
      const int subject = block - 3;
      const ResidualKernel kernel(p.err);
      const RandomEffectsSpec re{tf_.random_dim(), p.Lv};
      out = subject_loglik(data_, subject, p, spec_, kernel) +
            random_effects_logdensity(p.v.row(subject), re);
    }
    if (std::isnan(out)) throw std::runtime_error("log-posterior evaluated to NaN");
    return out;
  }

 private:
  double kappa_jacobian(const Eigen::VectorXd& x) const {
    if (spec_.priors.kappa_prior == KappaPriorKind::uniform) {
      const double width = spec_.priors.kappa_hi - spec_.priors.kappa_lo;
      double jac = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double z = x[tf_.kappa_offset() + k];
        const double s = 1.0 / (1.0 + std::exp(-z));
        jac += std::log(width) + std::log(s) + std::log1p(-s);
      }
      return jac;
    }
    return x[tf_.kappa_offset()] + x[tf_.kappa_offset() + 1];
  }

  const Dataset& data_;
  ModelSpec spec_;
  ParameterTransform tf_;
  std::vector<BlockSpec> blocks_;
};

// Crude least-squares start for the fixed effects; everything else begins at
// the Laplace special case (sigma = 1, kappa = 1, L_v = I, v = 0).
ModelParams initial_params(const Dataset& data, const ModelSpec& spec) {
  std::vector<double> t, y;
  for (const auto& o : data.observations()) {
    if (o.censor == CensorKind::observed) {
      t.push_back(o.time);
      y.push_back(o.response);
    }
  }
  if (t.size() < 3) {
    for (const auto& o : data.observations()) {
      t.push_back(o.time);
      y.push_back(o.response);
    }
  }
  const int n = static_cast<int>(t.size());
  double slope = 0.0, intercept = 0.0;
  {
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int i = 0; i < n; ++i) {
      st += t[i];
      sy += y[i];
      stt += t[i] * t[i];
      sty += t[i] * y[i];
    }
    const double den = n * stt - st * st;
    if (den > 1e-12) {
      slope = (n * sty - st * sy) / den;
      intercept = (sy - slope * st) / n;
    } else {
      intercept = sy / n;
    }
  }

  ModelParams p;
  const int q = spec.link.random_dim();
  p.fx.beta = Eigen::VectorXd::Zero(spec.link.n_beta());
  p.fx.gamma = 0.0;
  if (spec.link.kind == LinkKind::linear) {
    p.fx.beta << intercept, slope;
  } else {
    const double ln10 = std::log(10.0);
    const double a = intercept * ln10;
    const double lambda = std::max(-slope * ln10, 0.05);
    p.fx.beta << a + std::log(0.9), 3.0 * lambda, a + std::log(0.1), 0.3 * lambda;
  }

  p.err.kernel = spec.kernel;
  p.err.p0 = spec.p0;
  p.err.sigma = 1.0;
  double kappa0 = 1.0;
  if (spec.kernel == Kernel::sep && spec.priors.kappa_prior == KappaPriorKind::uniform) {
    const double lo = spec.priors.kappa_lo, hi = spec.priors.kappa_hi;
    if (!(kappa0 > lo && kappa0 < hi)) kappa0 = 0.5 * (lo + hi);
  }
  p.err.kappa1 = p.err.kappa2 = kappa0;

  p.Lv = Eigen::MatrixXd::Identity(q, q);
  p.v = Eigen::MatrixXd::Zero(data.n_subjects(), q);
  return p;
}

}  // namespace

SampleResult run_chains(const Dataset& data, const ModelSpec& spec, const ChainConfig& cfg) {
  if (data.n_covariates() < spec.link.required_covariates())
    throw std::invalid_argument("dataset does not provide the covariates the link requires");
  if (!(spec.p0 > 0.0 && spec.p0 < 1.0))
    throw std::invalid_argument("target quantile must lie in (0,1)");

  const ModelTarget target(data, spec);
  const ParameterTransform& tf = target.transform();
  const ModelParams init = initial_params(data, spec);

  {
    const double prior = log_prior(init, spec, data.n_subjects());
    if (!std::isfinite(prior))
      throw std::runtime_error("initialization failed: log-prior is not finite at the start point");
    const double lik = log_likelihood(data, init, spec);
    if (!std::isfinite(lik))
      throw std::runtime_error(
          "initialization failed: log-likelihood is not finite at the start point");
  }

  const RawDraws raw = run_mcmc(target, tf.unconstrain(init), cfg);

  SampleResult result;
  PosteriorDraws& d = result.draws;
  d.names = tf.names();
  d.unconstrained = raw.x;
  d.lp = raw.lp;
  d.chain = raw.chain;
  d.n_chains = raw.n_chains;
  d.n_keep = raw.n_keep;
  d.values.resize(raw.x.rows(), raw.x.cols());
  for (long r = 0; r < raw.x.rows(); ++r)
    d.values.row(r) = tf.pack(tf.constrain(raw.x.row(r).transpose()));
  result.block_names = raw.block_names;
  result.accept_rate = raw.accept_rate;
  return result;
}

namespace {

// Splits chain-major values into 2*n_chains half-sequences of equal length.
std::vector<Eigen::VectorXd> split_sequences(const Eigen::VectorXd& values, int n_chains) {
  const long total = values.size();
  const long n = total / n_chains;
  const long h = n / 2;
  std::vector<Eigen::VectorXd> seqs;
  if (h < 2) return seqs;
  for (int c = 0; c < n_chains; ++c) {
    seqs.push_back(values.segment(c * n, h));
    seqs.push_back(values.segment(c * n + (n - h), h));
  }
  return seqs;
}

}  // namespace

std::optional<double> split_rhat(const Eigen::VectorXd& values, int n_chains) {
  if (n_chains < 1 || values.size() % n_chains != 0) return std::nullopt;
  const auto seqs = split_sequences(values, n_chains);
  if (seqs.size() < 2) return std::nullopt;
  const long h = seqs.front().size();

  Eigen::VectorXd means(seqs.size()), vars(seqs.size());
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    means[j] = seqs[j].mean();
    vars[j] = (seqs[j].array() - means[j]).square().sum() / static_cast<double>(h - 1);
  }
  const double w = vars.mean();
  if (!(w > 0.0)) return std::nullopt;
  const double grand = means.mean();
  const double b =
      h * (means.array() - grand).square().sum() / static_cast<double>(seqs.size() - 1);
  const double varplus = (h - 1.0) / h * w + b / h;
  return std::sqrt(varplus / w);
}

std::optional<double> effective_sample_size(const Eigen::VectorXd& values, int n_chains) {
  if (n_chains < 1 || values.size() % n_chains != 0) return std::nullopt;
  const auto seqs = split_sequences(values, n_chains);
  if (seqs.empty()) return std::nullopt;
  const long n = seqs.front().size();
  const long m = static_cast<long>(seqs.size());

  Eigen::VectorXd means(m), vars(m);
  for (long j = 0; j < m; ++j) {
    means[j] = seqs[j].mean();
    vars[j] = (seqs[j].array() - means[j]).square().sum() / static_cast<double>(n - 1);
  }
  const double w = vars.mean();
  if (!(w > 0.0)) return std::nullopt;
  double varplus = (n - 1.0) / n * w;
  if (m >= 2) {
    const double grand = means.mean();
    varplus += (means.array() - grand).square().sum() / static_cast<double>(m - 1);
  } else {
    varplus = w;
  }

  auto mean_acov = [&](long lag) {
    double s = 0.0;
    for (long j = 0; j < m; ++j) {
      const auto& seq = seqs[j];
      double a = 0.0;
      for (long i = 0; i + lag < n; ++i) a += (seq[i] - means[j]) * (seq[i + lag] - means[j]);
      s += a / static_cast<double>(n);
    }
    return s / static_cast<double>(m);
  };

  // Geyer initial monotone positive sequence over lag pairs.
  const long max_lag = std::min<long>(n - 2, 2000);
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (long lag = 0; lag + 1 <= max_lag; lag += 2) {
    const double rho_even = 1.0 - (w - mean_acov(lag)) / varplus;
    const double rho_odd = 1.0 - (w - mean_acov(lag + 1)) / varplus;
    double pair = rho_even + rho_odd;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
    if (pair < 1e-4) break;
  }
  tau -= 1.0;
  tau = std::max(tau, 1e-3);
  return static_cast<double>(m * n) / tau;
}

std::optional<double> rhat(const PosteriorDraws& draws, const std::string& param) {
  const int c = draws.column(param);
  if (c < 0) throw std::invalid_argument("unknown parameter '" + param + "'");
  return split_rhat(draws.values.col(c), draws.n_chains);
}

std::optional<double> effective_sample_size(const PosteriorDraws& draws,
                                            const std::string& param) {
  const int c = draws.column(param);
  if (c < 0) throw std::invalid_argument("unknown parameter '" + param + "'");
  return effective_sample_size(draws.values.col(c), draws.n_chains);
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

ConvergenceReport convergence_report(const SampleResult& result, double rhat_threshold) {
  const PosteriorDraws& d = result.draws;
  ConvergenceReport rep;
  rep.names = d.names;
  rep.rhat_threshold = rhat_threshold;
  rep.block_names = result.block_names;
  rep.accept_rate = result.accept_rate;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.max_rhat = 0.0;
  for (std::size_t j = 0; j < d.names.size(); ++j) {
    const auto r = split_rhat(d.values.col(j), d.n_chains);
    const auto e = effective_sample_size(d.values.col(j), d.n_chains);
    rep.rhat.push_back(r.value_or(nan));
    rep.ess.push_back(e.value_or(nan));
    rep.degenerate.push_back(!r.has_value());
    if (r) rep.max_rhat = std::max(rep.max_rhat, *r);
  }
  rep.converged = rep.max_rhat <= rhat_threshold;
  return rep;
}

}  // namespace sepq
