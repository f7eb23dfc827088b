// Command-line front end. Everything flows through the C API in sepq/sepq.h;
// this file only parses options, composes JSON configs, and writes files.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sepq/sepq.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 2 schema/input error, 3 convergence warning, 4 numeric.
int status_to_exit(sepq_status s) {
  switch (s) {
    case SEPQ_OK: return 0;
    case SEPQ_WARN_CONVERGENCE: return 3;
    case SEPQ_ERR_SCHEMA: return 2;
    case SEPQ_ERR_IO: return 2;
    case SEPQ_ERR_INVALID: return 2;
    case SEPQ_ERR_NUMERIC: return 4;
  }
  return 4;
}

[[noreturn]] void fail(sepq_status s, const std::string& context) {
  std::cerr << "error: " << context << ": " << sepq_last_error() << "\n";
  std::exit(status_to_exit(s));
}

void check(sepq_status s, const std::string& context) {
  if (s != SEPQ_OK && s != SEPQ_WARN_CONVERGENCE) fail(s, context);
}

std::uint64_t mix64(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Flat key=value configuration file; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << path << "'\n";
    std::exit(2);
  }
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

struct Options {
  std::string data;
  std::string config_path;
  std::string out = "sepq_out";
  std::string kernel = "both";
  std::string quantiles = "0.10,0.25,0.50,0.75,0.90";
  std::string link = "biexponential";
  std::uint64_t seed = 20260809;
  int workers = 0;
  bool full_scale = false;
  std::map<std::string, std::string> file;  // config-file values (lowest precedence)
  std::map<std::string, std::string> cli;   // explicit command-line overrides

  std::string get(const std::string& key, const std::string& fallback) const {
    auto c = cli.find(key);
    if (c != cli.end()) return c->second;
    auto f = file.find(key);
    if (f != file.end()) return f->second;
    return fallback;
  }
  double get_num(const std::string& key, double fallback) const {
    const std::string s = get(key, "");
    return s.empty() ? fallback : std::stod(s);
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const std::string s = get(key, "");
    return s.empty() ? fallback : std::stoull(s);
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::string p0_tag(double p0) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%03d", static_cast<int>(p0 * 1000 + 0.5));
  return buf;
}

struct Cell {
  std::string kernel;
  double p0;
};

std::vector<Cell> make_cells(const Options& opt) {
  std::vector<double> quantiles = parse_list(opt.get("quantiles", opt.quantiles));
  if (quantiles.empty()) {
    std::cerr << "error: empty quantile list\n";
    std::exit(2);
  }
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0) ||
        (i > 0 && quantiles[i] <= quantiles[i - 1])) {
      std::cerr << "error: quantiles must be sorted and strictly inside (0,1)\n";
      std::exit(2);
    }
  }
  const std::string kernel = opt.get("kernel", opt.kernel);
  std::vector<std::string> kernels;
  if (kernel == "both") kernels = {"sl", "sep"};
  else if (kernel == "sl" || kernel == "sep") kernels = {kernel};
  else {
    std::cerr << "error: --kernel must be sl, sep or both\n";
    std::exit(2);
  }
  std::vector<Cell> cells;
  for (const auto& k : kernels)
    for (double p0 : quantiles) cells.push_back({k, p0});
  return cells;
}

using DatasetPtr = std::unique_ptr<sepq_dataset, decltype(&sepq_dataset_free)>;

DatasetPtr load_dataset(const Options& opt) {
  const std::string path = opt.get("data", opt.data);
  if (path.empty()) {
    std::cerr << "error: --data is required\n";
    std::exit(2);
  }
  sepq_dataset* raw = nullptr;
  const sepq_status s = sepq_dataset_read_csv(path.c_str(), &raw);
  if (s != SEPQ_OK) fail(s, "reading " + path);
  DatasetPtr ds(raw, &sepq_dataset_free);

  json tf;
  tf["time_center"] = opt.get_num("time_center", 0.0);
  tf["time_scale"] = opt.get_num("time_scale", 1.0);
  const double cc = opt.get_num("cd4_center", 0.0);
  const double cs = opt.get_num("cd4_scale", 1.0);
  if (cc != 0.0 || cs != 1.0) {
    tf["covariate_transforms"] = json::array(
        {{{"index", static_cast<int>(opt.get_num("cd4_index", 0))}, {"center", cc}, {"scale", cs}}});
  }
  check(sepq_dataset_rescale(ds.get(), tf.dump().c_str()), "rescaling dataset");
  return ds;
}

json fit_config(const Options& opt, const std::string& kernel, double p0, std::uint64_t seed) {
  json j;
  j["kernel"] = kernel;
  j["p0"] = p0;
  j["link"] = opt.get("link", opt.link);
  j["cd4_index"] = static_cast<int>(opt.get_num("cd4_index", 0));
  j["rhat_threshold"] = opt.get_num("rhat_threshold", 1.05);
  j["priors"] = {{"beta_variance", opt.get_num("beta_variance", 1000.0)},
                 {"offdiag_variance", opt.get_num("offdiag_variance", 1000.0)},
                 {"kappa_prior", opt.get("kappa_prior", "half_t")},
                 {"kappa_lo", opt.get_num("kappa_lo", 0.01)},
                 {"kappa_hi", opt.get_num("kappa_hi", 3.0)}};
  j["chains"] = {{"n_chains", static_cast<int>(opt.get_num("chains", 4))},
                 {"warmup", static_cast<int>(opt.get_num("warmup", 5000))},
                 {"keep", static_cast<int>(opt.get_num("keep", 5000))},
                 {"thin", static_cast<int>(opt.get_num("thin", 1))},
                 {"seed", seed},
                 {"workers", 1}};
  j["metadata"] = {{"time_center", opt.get_num("time_center", 0.0)},
                   {"time_scale", opt.get_num("time_scale", 1.0)},
                   {"cd4_center", opt.get_num("cd4_center", 0.0)},
                   {"cd4_scale", opt.get_num("cd4_scale", 1.0)}};
  return j;
}

using FitPtr = std::unique_ptr<sepq_fit, decltype(&sepq_fit_free)>;

struct CellFit {
  Cell cell;
  FitPtr fit{nullptr, &sepq_fit_free};
  bool converged = true;
};

// Fits every (kernel, quantile) cell, bounded by the worker count. Artifacts
// are written per cell; seeds derive from the cell index, so the schedule
// never changes results.
std::vector<CellFit> run_fits(const Options& opt, sepq_dataset* data) {
  const auto cells = make_cells(opt);
  const std::uint64_t seed = opt.get_u64("seed", opt.seed);
  std::vector<CellFit> fits(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> failure{-1};
  std::mutex log_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size() || failure.load() >= 0) return;
      const Cell& cell = cells[i];
      const json cfg = fit_config(opt, cell.kernel, cell.p0, mix64(seed, i));
      sepq_fit* raw = nullptr;
      const sepq_status s = sepq_fit_run(data, cfg.dump().c_str(), &raw);
      if (s != SEPQ_OK && s != SEPQ_WARN_CONVERGENCE) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "error: fit " << cell.kernel << " " << p0_tag(cell.p0) << ": "
                  << sepq_last_error() << "\n";
        failure.store(status_to_exit(s));
        return;
      }
      fits[i].cell = cell;
      fits[i].fit.reset(raw);
      fits[i].converged = sepq_fit_converged(raw) != 0;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cout << "fitted " << cell.kernel << " at p0=" << cell.p0
                << (fits[i].converged ? "" : "  [convergence warning]") << "\n";
    }
  };

  int n_workers = opt.workers > 0 ? opt.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  n_workers = std::min<std::size_t>(n_workers, cells.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure.load() >= 0) std::exit(failure.load());
  return fits;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(2);
  }
  out << text;
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  sepq_string_free(s);
  return out;
}

void write_fit_artifacts(const Options& opt, const std::vector<CellFit>& fits) {
  const fs::path out_dir = opt.get("out", opt.out);
  fs::create_directories(out_dir);

  std::string forest = "kernel,p0,param,median,lower95,upper95\n";
  for (const auto& cf : fits) {
    const std::string tag = cf.cell.kernel + "_" + p0_tag(cf.cell.p0);
    check(sepq_fit_write_draws_csv(cf.fit.get(), (out_dir / ("draws_" + tag + ".csv")).c_str()),
          "writing draws");
    char* summary = nullptr;
    check(sepq_fit_summary_json(cf.fit.get(), &summary), "summarizing fit");
    const std::string summary_text = take_string(summary);
    write_text(out_dir / ("summary_" + tag + ".json"), summary_text);

    const json sj = json::parse(summary_text);
    write_text(out_dir / ("convergence_" + tag + ".json"), sj["convergence"].dump(2));
    for (const auto& [name, q] : sj["params"].items()) {
      std::ostringstream row;
      row.precision(10);
      row << cf.cell.kernel << ',' << cf.cell.p0 << ',' << name << ','
          << q["median"].get<double>() << ',' << q["lower95"].get<double>() << ','
          << q["upper95"].get<double>() << '\n';
      forest += row.str();
    }
  }
  write_text(out_dir / "summary.csv", forest);
}

int finish(const std::vector<CellFit>& fits) {
  for (const auto& cf : fits)
    if (!cf.converged) {
      std::cerr << "warning: at least one fit exceeded the R-hat threshold\n";
      return 3;
    }
  return 0;
}

int cmd_fit(const Options& opt) {
  DatasetPtr data = load_dataset(opt);
  const auto fits = run_fits(opt, data.get());
  write_fit_artifacts(opt, fits);
  return finish(fits);
}

int cmd_compare(const Options& opt) {
  DatasetPtr data = load_dataset(opt);
  const auto fits = run_fits(opt, data.get());
  write_fit_artifacts(opt, fits);
  const fs::path out_dir = opt.get("out", opt.out);

  json bridge_cfg;
  bridge_cfg["tol"] = opt.get_num("bridge_tol", 1e-10);
  bridge_cfg["max_iter"] = static_cast<int>(opt.get_num("bridge_max_iter", 1000));
  const std::uint64_t bseed = opt.get_u64("bridge_seed", opt.get_u64("seed", opt.seed) + 1);
  const int bdraws = static_cast<int>(opt.get_num("bridge_draws", -1));
  if (bdraws > 0) bridge_cfg["n_proposal_draws"] = bdraws;

  std::map<double, std::map<std::string, json>> by_p0;
  bool bridge_warned = false;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    bridge_cfg["seed"] = mix64(bseed, i);
    char* out = nullptr;
    const sepq_status s =
        sepq_fit_log_marginal(fits[i].fit.get(), bridge_cfg.dump().c_str(), &out);
    check(s, "bridge sampling");
    if (s == SEPQ_WARN_CONVERGENCE) bridge_warned = true;
    by_p0[fits[i].cell.p0][fits[i].cell.kernel] = json::parse(take_string(out));
  }

  json table = json::array();
  std::string csv = "p0,logml_skl,logml_sep,gap_sep_minus_skl\n";
  for (const auto& [p0, models] : by_p0) {
    json row;
    row["p0"] = p0;
    std::ostringstream line;
    line.precision(10);
    line << p0 << ',';
    const bool has_sl = models.count("sl") > 0, has_sep = models.count("sep") > 0;
    if (has_sl) {
      row["skl"] = models.at("sl");
      line << models.at("sl")["log_ml"].get<double>();
    }
    line << ',';
    if (has_sep) {
      row["sep"] = models.at("sep");
      line << models.at("sep")["log_ml"].get<double>();
    }
    line << ',';
    if (has_sl && has_sep) {
      const double gap =
          models.at("sep")["log_ml"].get<double>() - models.at("sl")["log_ml"].get<double>();
      row["gap_sep_minus_skl"] = gap;
      line << gap;
    }
    line << '\n';
    csv += line.str();
    table.push_back(std::move(row));
  }
  write_text(out_dir / "logml.csv", csv);
  write_text(out_dir / "logml.json", table.dump(2));
  std::cout << csv;

  const int rc = finish(fits);
  return rc != 0 ? rc : (bridge_warned ? 3 : 0);
}

int cmd_residuals(const Options& opt) {
  DatasetPtr data = load_dataset(opt);
  const auto fits = run_fits(opt, data.get());
  const fs::path out_dir = opt.get("out", opt.out);
  fs::create_directories(out_dir);

  json cfg;
  cfg["n_sims"] = static_cast<int>(opt.get_num("n_sims", 250));
  const std::uint64_t seed = opt.get_u64("seed", opt.seed);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    cfg["seed"] = mix64(seed + 17, i);
    const std::string tag = fits[i].cell.kernel + "_" + p0_tag(fits[i].cell.p0);
    char* out = nullptr;
    check(sepq_fit_residuals(fits[i].fit.get(), cfg.dump().c_str(),
                             (out_dir / ("qq_" + tag + ".csv")).c_str(), &out),
          "residual diagnostics");
    const std::string text = take_string(out);
    write_text(out_dir / ("residuals_" + tag + ".json"), text);
    const json j = json::parse(text);
    std::cout << tag << ": KS=" << j["ks_statistic"].get<double>()
              << " p=" << j["p_value"].get<double>() << "\n";
  }
  return finish(fits);
}

int cmd_trajectory(const Options& opt) {
  DatasetPtr data = load_dataset(opt);

  double t_lo = 0.0, t_hi = 1.0;
  check(sepq_dataset_time_range(data.get(), &t_lo, &t_hi), "reading time range");
  json cfg;
  cfg["t_min"] = opt.get_num("t_min", t_lo);
  cfg["t_max"] = opt.get_num("t_max", t_hi);
  cfg["n_points"] = static_cast<int>(opt.get_num("t_points", 101));
  cfg["cd4_baseline"] = opt.get_num("cd4_baseline", 0.0);
  cfg["cd4_slope"] = opt.get_num("cd4_slope", 0.0);

  const auto fits = run_fits(opt, data.get());
  const fs::path out_dir = opt.get("out", opt.out);
  fs::create_directories(out_dir);
  for (const auto& cf : fits) {
    const std::string tag = cf.cell.kernel + "_" + p0_tag(cf.cell.p0);
    check(sepq_fit_trajectory(cf.fit.get(), cfg.dump().c_str(),
                              (out_dir / ("trajectory_" + tag + ".csv")).c_str()),
          "writing trajectory");
  }
  return finish(fits);
}

json scenario_json(const Options& opt) {
  json j;
  j["censor_frac"] = opt.get_num("censor_frac", 0.05);
  j["p0"] = opt.get_num("sim_p0", 0.5);
  j["kappa1"] = opt.get_num("sim_kappa1", 2.0);
  j["kappa2"] = opt.get_num("sim_kappa2", 0.5);
  j["n_subjects"] = static_cast<int>(opt.get_num("n_subjects", 15));
  j["sigma"] = opt.get_num("sim_sigma", 0.40);
  j["beta"] = {opt.get_num("sim_beta1", 5.0), opt.get_num("sim_beta2", -0.25)};
  j["re_sd"] = {opt.get_num("re_sd1", 3.0), opt.get_num("re_sd2", 1.5)};
  const std::string times = opt.get("sim_times", "");
  if (!times.empty()) j["times"] = parse_list(times);
  return j;
}

int cmd_simulate(const Options& opt) {
  json j = scenario_json(opt);
  j["seed"] = opt.get_u64("seed", opt.seed);
  sepq_dataset* raw = nullptr;
  check(sepq_dataset_simulate(j.dump().c_str(), &raw), "simulating dataset");
  DatasetPtr ds(raw, &sepq_dataset_free);
  const std::string out = opt.get("out", "simulated.csv");
  check(sepq_dataset_write_csv(ds.get(), out.c_str()), "writing dataset");
  std::cout << "wrote " << out << " (" << sepq_dataset_n_subjects(ds.get()) << " subjects, "
            << sepq_dataset_n_obs(ds.get()) << " rows)\n";
  return 0;
}

int cmd_simstudy(const Options& opt) {
  json j = scenario_json(opt);
  j.erase("censor_frac");
  j.erase("p0");
  j.erase("kappa1");
  j.erase("kappa2");
  j["seed"] = opt.get_u64("seed", opt.seed);
  j["n_reps"] = opt.full_scale ? 300 : static_cast<int>(opt.get_num("n_reps", 50));
  j["workers"] = opt.workers;
  j["rhat_threshold"] = opt.get_num("sim_rhat_threshold", 1.1);
  j["models"] = opt.get("models", "both");
  j["chains"] = {{"n_chains", static_cast<int>(opt.get_num("chains", 4))},
                 {"warmup", static_cast<int>(opt.get_num("warmup", 2500))},
                 {"keep", static_cast<int>(opt.get_num("keep", 2500))},
                 {"thin", static_cast<int>(opt.get_num("thin", 1))}};

  // Explicit scenario list: "scenarios=c:p0:k1:k2;c:p0:k1:k2;..."
  const std::string scen = opt.get("scenarios", "");
  if (!scen.empty()) {
    json list = json::array();
    std::stringstream ss(scen);
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (item.empty()) continue;
      std::vector<double> f;
      std::stringstream fs_(item);
      std::string v;
      while (std::getline(fs_, v, ':')) f.push_back(std::stod(v));
      if (f.size() != 4) {
        std::cerr << "error: each scenario needs censor:p0:kappa1:kappa2\n";
        return 2;
      }
      list.push_back({{"censor_frac", f[0]}, {"p0", f[1]}, {"kappa1", f[2]}, {"kappa2", f[3]}});
    }
    j["scenarios"] = std::move(list);
  }

  const fs::path out_dir = opt.get("out", opt.out);
  fs::create_directories(out_dir);
  char* out = nullptr;
  check(sepq_simstudy_run(j.dump().c_str(), (out_dir / "simstudy.csv").c_str(), &out),
        "simulation study");
  write_text(out_dir / "simstudy.json", take_string(out));
  std::cout << "wrote " << (out_dir / "simstudy.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quantile mixed-effects models for censored longitudinal data"};
  app.require_subcommand(1);

  Options opt;
  std::string quantiles_flag, kernel_flag, link_flag, seed_flag, workers_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--data", opt.data, "input CSV (subject_id,time,response,censor,bound2,...)");
    cmd->add_option("--config", opt.config_path, "key=value configuration file");
    cmd->add_option("--out", opt.out, "output directory (or file for simulate)");
    cmd->add_option("--quantiles", quantiles_flag, "comma-separated target quantiles");
    cmd->add_option("--kernel", kernel_flag, "sl, sep or both");
    cmd->add_option("--link", link_flag, "linear or biexponential");
    cmd->add_option("--seed", seed_flag, "master seed");
    cmd->add_option("--workers", workers_flag, "max concurrent fits/replicates");
    cmd->add_flag("--full-scale", opt.full_scale, "simulation study at the full 300 replicates");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit the model at each kernel/quantile");
  CLI::App* compare = app.add_subcommand("compare", "bridge-sampled log marginal likelihoods");
  CLI::App* residuals = app.add_subcommand("residuals", "simulation-based residual checks");
  CLI::App* trajectory = app.add_subcommand("trajectory", "population quantile trajectories");
  CLI::App* simstudy = app.add_subcommand("simstudy", "frequentist performance study");
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic dataset only");
  for (CLI::App* cmd : {fit, compare, residuals, trajectory, simstudy, simulate})
    add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = nullptr;
  for (CLI::App* cmd : {fit, compare, residuals, trajectory, simstudy, simulate})
    if (cmd->parsed()) active = cmd;

  if (!opt.config_path.empty()) opt.file = read_config_file(opt.config_path);
  if (!quantiles_flag.empty()) opt.cli["quantiles"] = quantiles_flag;
  if (!kernel_flag.empty()) opt.cli["kernel"] = kernel_flag;
  if (!link_flag.empty()) opt.cli["link"] = link_flag;
  if (!seed_flag.empty()) opt.cli["seed"] = seed_flag;
  if (!workers_flag.empty()) opt.workers = std::stoi(workers_flag);
  if (!opt.data.empty()) opt.cli["data"] = opt.data;
  if ((active && active->count("--out") > 0) || !opt.file.count("out"))
    opt.cli["out"] = opt.out;

  try {
    if (fit->parsed()) return cmd_fit(opt);
    if (compare->parsed()) return cmd_compare(opt);
    if (residuals->parsed()) return cmd_residuals(opt);
    if (trajectory->parsed()) return cmd_trajectory(opt);
    if (simstudy->parsed()) return cmd_simstudy(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
