#include "popadj/simstudy.hpp"

#include "popadj/config.hpp"
#include "popadj/covariate_sim.hpp"
#include "popadj/error.hpp"
#include "popadj/gcomp.hpp"
#include "popadj/itc.hpp"
#include "popadj/maic.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace popadj {

const char* to_string(Method m) {
  switch (m) {
    case Method::kBucher: return "bucher";
    case Method::kMaic: return "maic";
    case Method::kStc: return "stc";
    case Method::kGcompMl: return "gcomp-ml";
    case Method::kGcompBayes: return "gcomp-bayes";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (auto m : all_methods())
    if (name == to_string(m)) return m;
  throw ConfigError("unknown method '" + name + "' (expected bucher, maic, stc, gcomp-ml or gcomp-bayes)");
}

std::vector<Method> all_methods() {
  return {Method::kBucher, Method::kMaic, Method::kStc, Method::kGcompMl, Method::kGcompBayes};
}

DgpConfig ScenarioConfig::ac_config() const {
  DgpConfig c = dgp;
  c.n = n_ac;
  c.mu = Eigen::VectorXd::Constant(c.k, mu_ac);
  c.sigma = sigma;
  c.rho = rho;
  return c;
}

DgpConfig ScenarioConfig::bc_config() const {
  DgpConfig c = dgp;
  c.n = n_bc;
  c.mu = Eigen::VectorXd::Constant(c.k, mu_bc);
  c.sigma = sigma;
  c.rho = rho;
  return c;
}

std::string ScenarioConfig::name() const {
  std::ostringstream os;
  os << "N" << n_ac << "_mu" << std::fixed;
  os.precision(2);
  os << mu_ac;
  return os.str();
}

void validate(const ScenarioConfig& c) {
  if (!c.override_grid) {
    if (c.n_ac != 200 && c.n_ac != 400 && c.n_ac != 600)
      throw ConfigError("scenario: n_ac must be 200, 400 or 600 unless override_grid is set");
    const bool mu_ok = std::abs(c.mu_ac - 0.45) < 1e-12 || std::abs(c.mu_ac - 0.30) < 1e-12 ||
                       std::abs(c.mu_ac - 0.15) < 1e-12;
    if (!mu_ok) throw ConfigError("scenario: mu_ac must be 0.45, 0.30 or 0.15 unless override_grid is set");
  }
  if (c.n_replicates < 2) throw ConfigError("scenario: need at least two replicates");
  if (c.methods.empty()) throw ConfigError("scenario: no methods selected");
  if (c.maic_n_boot < 2 || c.gcomp_n_boot < 2) throw ConfigError("scenario: need at least two bootstrap resamples");
  if (c.mcmc_chains < 1 || c.mcmc_draws < 2 * c.mcmc_chains || c.mcmc_warmup < 0)
    throw ConfigError("scenario: invalid MCMC settings");
  validate(c.ac_config());
  validate(c.bc_config());
}

std::vector<ScenarioConfig> default_grid(const ScenarioConfig& base) {
  std::vector<ScenarioConfig> grid;
  for (int n : {200, 400, 600})
    for (double mu : {0.45, 0.30, 0.15}) {
      ScenarioConfig c = base;
      c.n_ac = n;
      c.mu_ac = mu;
      grid.push_back(c);
    }
  return grid;
}

std::vector<ScenarioConfig> scenarios_from_entries(const std::map<std::string, std::string>& entries) {
  ScenarioConfig base;
  std::vector<int> n_list = {200, 400, 600};
  std::vector<double> mu_list = {0.45, 0.30, 0.15};
  std::map<std::string, std::string> dgp_entries;
  for (const auto& [key, value] : entries) {
    if (key == "n_replicates") base.n_replicates = parse_int(key, value);
    else if (key == "master_seed" || key == "seed") base.master_seed = parse_u64(key, value);
    else if (key == "methods") {
      base.methods.clear();
      for (const auto& m : split_list(value)) base.methods.push_back(method_from_string(m));
    } else if (key == "override_grid") base.override_grid = parse_bool(key, value);
    else if (key == "grid.n_ac") {
      n_list.clear();
      for (const auto& v : split_list(value)) n_list.push_back(parse_int(key, v));
    } else if (key == "grid.mu_ac") {
      mu_list.clear();
      for (const auto& v : split_list(value)) mu_list.push_back(parse_double(key, v));
    } else if (key == "n_bc") base.n_bc = parse_int(key, value);
    else if (key == "mu_bc") base.mu_bc = parse_double(key, value);
    else if (key == "sigma") base.sigma = parse_double(key, value);
    else if (key == "rho") base.rho = parse_double(key, value);
    else if (key == "n_boot") base.maic_n_boot = base.gcomp_n_boot = parse_int(key, value);
    else if (key == "maic.n_boot") base.maic_n_boot = parse_int(key, value);
    else if (key == "gcomp_ml.n_boot") base.gcomp_n_boot = parse_int(key, value);
    else if (key == "gcomp_ml.inference") {
      if (value == "bootstrap") base.gcomp_parametric = false;
      else if (value == "parametric-simulation") base.gcomp_parametric = true;
      else throw ConfigError("config key '" + key + "': expected bootstrap or parametric-simulation");
    } else if (key == "gcomp_bayes.chains") base.mcmc_chains = parse_int(key, value);
    else if (key == "gcomp_bayes.warmup") base.mcmc_warmup = parse_int(key, value);
    else if (key == "gcomp_bayes.draws" || key == "mcmc_draws") base.mcmc_draws = parse_int(key, value);
    else if (key == "gcomp_bayes.prior") {
      if (value == "flat") base.weak_prior = false;
      else if (value == "weak") base.weak_prior = true;
      else throw ConfigError("config key '" + key + "': expected flat or weak");
    } else if (key == "n_star") base.n_star = parse_int(key, value);
    else if (key == "workers") base.workers = static_cast<unsigned>(parse_int(key, value));
    else if (key.rfind("dgp.", 0) == 0) dgp_entries[key.substr(4)] = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  for (const auto& [k, v] : dgp_entries)
    if (k == "n" || k == "mu" || k == "sigma" || k == "rho")
      throw ConfigError("config key 'dgp." + k + "': set per scenario through the grid keys instead");
  apply_entries(base.dgp, dgp_entries);
  std::vector<ScenarioConfig> out;
  for (int n : n_list)
    for (double mu : mu_list) {
      ScenarioConfig c = base;
      c.n_ac = n;
      c.mu_ac = mu;
      validate(c);
      out.push_back(c);
    }
  return out;
}

PerformanceMetrics performance_measures(std::span<const double> est, std::span<const double> ses,
                                        std::span<const Interval> intervals, double truth) {
  const std::size_t n = est.size();
  if (ses.size() != n || intervals.size() != n)
    throw ConfigError("performance measures: inputs differ in length");
  if (n < 2) throw ConfigError("performance measures: need at least two estimates");
  if (!std::isfinite(truth)) throw ConfigError("performance measures: truth must be finite");
  const double nd = static_cast<double>(n);
  PerformanceMetrics m;
  m.n = static_cast<int>(n);
  const double avg = mean(est);
  const double var = sample_variance(est);
  m.bias = avg - truth;
  m.ese = std::sqrt(var);
  m.mcse_bias = std::sqrt(var / nd);
  m.vr = m.ese > 0.0 ? mean(ses) / m.ese : std::numeric_limits<double>::quiet_NaN();
  int covered = 0;
  double lsum = 0.0, usum = 0.0;
  for (const auto& iv : intervals) {
    covered += (iv.lower <= truth && truth <= iv.upper);
    lsum += iv.lower;
    usum += iv.upper;
  }
  m.cov = covered / nd;
  m.mcse_cov = std::sqrt(m.cov * (1.0 - m.cov) / nd);
  m.lci = lsum / nd;
  m.uci = usum / nd;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (est[i] - truth) * (est[i] - truth);
  m.mse = mean(sq);
  m.mcse_mse = std::sqrt(sample_variance(sq) / nd);
  return m;
}

double standardized_bias(const PerformanceMetrics& m) {
  if (!(m.ese > 0.0)) throw EstimationError("standardized bias: empirical standard error is zero");
  return 100.0 * m.bias / m.ese;
}

const MethodPerformance& PerformanceReport::at(Method m) const {
  for (const auto& mp : methods)
    if (mp.method == m) return mp;
  throw ConfigError(std::string("report has no results for method ") + to_string(m));
}

std::map<Method, double> standardized_bias(const PerformanceReport& report) {
  std::map<Method, double> out;
  for (const auto& mp : report.methods) out[mp.method] = standardized_bias(mp.metrics);
  return out;
}

std::map<Method, ReplicateRecord> run_replicate(const ScenarioConfig& cfg, int replicate) {
  const std::uint64_t scenario_key =
      static_cast<std::uint64_t>(cfg.n_ac) * 100000ULL + static_cast<std::uint64_t>(std::llround(cfg.mu_ac * 10000.0));
  const std::uint64_t rep_seed =
      derive_seed(cfg.master_seed, {scenario_key, static_cast<std::uint64_t>(replicate)});

  std::map<Method, ReplicateRecord> out;
  for (auto m : cfg.methods) out[m] = ReplicateRecord{};

  const IpdTrial ac = generate_ipd(cfg.ac_config(), derive_seed(rep_seed, {key(Stage::kAcTrial)}));
  const IpdTrial bc = generate_ipd(cfg.bc_config(), derive_seed(rep_seed, {key(Stage::kBcTrial)}));
  AldSummary ald = aggregate(bc);
  // The analyst sees BC summaries only; the dependence structure comes from the AC IPD.
  ald.corr.reset();

  MarginalEffect d20;
  try {
    d20 = marginal_effect_from_counts(ald);
  } catch (const EstimationError&) {
    for (auto& [m, rec] : out) rec.failure = Failure::kNumerical;
    return out;
  }

  const bool need_pseudo = std::find(cfg.methods.begin(), cfg.methods.end(), Method::kGcompMl) != cfg.methods.end() ||
                           std::find(cfg.methods.begin(), cfg.methods.end(), Method::kGcompBayes) != cfg.methods.end();
  std::optional<PseudoPopulation> pseudo;
  if (need_pseudo)
    pseudo = pseudo_population_from_ald(ald, &ac, cfg.n_star, derive_seed(rep_seed, {key(Stage::kPseudo)}),
                                        std::min(cfg.n_star, kMinPseudoPopulation));

  GcompConfig gc;
  gc.n_boot = cfg.gcomp_n_boot;
  gc.n_param_sim = cfg.gcomp_n_boot;
  gc.inference = cfg.gcomp_parametric ? MlInference::kParametricSimulation : MlInference::kBootstrap;
  gc.mcmc.n_chains = cfg.mcmc_chains;
  gc.mcmc.n_warmup = cfg.mcmc_warmup;
  gc.mcmc.n_keep = cfg.mcmc_draws / cfg.mcmc_chains;
  gc.workers = 1;
  if (cfg.weak_prior) gc.prior_sd = weakly_informative_prior_sd(build_qmodel_design(ac));

  for (auto m : cfg.methods) {
    const std::uint64_t method_seed = derive_seed(rep_seed, {100 + static_cast<std::uint64_t>(m)});
    try {
      MarginalEffect d10;
      switch (m) {
        case Method::kBucher: d10 = marginal_effect_from_counts(ac); break;
        case Method::kMaic: d10 = maic_marginal_effect(ac, ald.theta_em(), cfg.maic_n_boot, method_seed); break;
        case Method::kStc: d10 = stc_conventional(ac, ald); break;
        case Method::kGcompMl: d10 = gcomp_ml(ac, *pseudo, gc, method_seed); break;
        case Method::kGcompBayes: d10 = gcomp_bayes(ac, *pseudo, gc, method_seed); break;
      }
      const IndirectComparison r = bucher(d10, d20);
      if (!std::isfinite(r.estimate) || !std::isfinite(r.variance)) {
        out[m].failure = Failure::kNumerical;
        continue;
      }
      out[m] = ReplicateRecord{true, r.estimate, std::sqrt(r.variance), r.lci, r.uci};
    } catch (const InfeasibleError&) {
      out[m].failure = Failure::kInfeasible;
    } catch (const EstimationError&) {
      out[m].failure = Failure::kNumerical;
    }
  }
  return out;
}

PerformanceReport build_report(const std::map<Method, std::vector<ReplicateRecord>>& records) {
  PerformanceReport report;
  for (const auto& [method, recs] : records) {
    std::vector<double> est, ses;
    std::vector<Interval> iv;
    MethodPerformance mp;
    mp.method = method;
    for (const auto& r : recs) {
      if (!r.ok) {
        ++mp.n_discarded;
        mp.n_infeasible += r.failure == Failure::kInfeasible;
        continue;
      }
      est.push_back(r.estimate);
      ses.push_back(r.se);
      iv.push_back({r.lci, r.uci});
      mp.max_abs_estimate = std::max(mp.max_abs_estimate, std::abs(r.estimate));
    }
    if (est.size() >= 2) mp.metrics = performance_measures(est, ses, iv, kTrueEffect);
    if (mp.n_discarded > 0.10 * static_cast<double>(recs.size()))
      report.warnings.push_back(std::string(to_string(method)) + ": " + std::to_string(mp.n_discarded) +
                                " of " + std::to_string(recs.size()) + " replicates discarded");
    report.methods.push_back(mp);
  }
  return report;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::function<void(int)>& on_replicate) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(cfg.n_replicates);
  std::vector<std::map<Method, ReplicateRecord>> per_rep(n);
  parallel_for(n, cfg.workers, [&](std::size_t r) {
    per_rep[r] = run_replicate(cfg, static_cast<int>(r));
    if (on_replicate) on_replicate(static_cast<int>(r));
  });
  ScenarioResult result;
  result.config = cfg;
  for (auto m : cfg.methods) {
    auto& recs = result.records[m];
    recs.reserve(n);
    for (const auto& rep : per_rep) recs.push_back(rep.at(m));
  }
  result.report = build_report(result.records);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_report_csv(std::ostream& os, std::span<const ScenarioResult> results) {
  os.precision(10);
  os << "scenario,n_ac,mu_ac,method,ATE,MCSE_ATE,LCI,UCI,VR,Cov,MCSE_Cov,ESE,MSE,MCSE_MSE,N_discarded\n";
  for (const auto& res : results)
    for (const auto& mp : res.report.methods) {
      const auto& m = mp.metrics;
      os << res.config.name() << "," << res.config.n_ac << "," << res.config.mu_ac << ","
         << to_string(mp.method) << "," << m.bias << "," << m.mcse_bias << "," << m.lci << ","
         << m.uci << "," << m.vr << "," << m.cov << "," << m.mcse_cov << "," << m.ese << ","
         << m.mse << "," << m.mcse_mse << "," << mp.n_discarded << "\n";
    }
}

namespace {

nlohmann::json settings(const ScenarioConfig& c) {
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.emplace_back(to_string(m));
  return {{"n_bc", c.n_bc},
          {"mu_bc", c.mu_bc},
          {"sigma", c.sigma},
          {"rho", c.rho},
          {"dgp", to_config_text(c.dgp)},
          {"methods", methods},
          {"maic_n_boot", c.maic_n_boot},
          {"gcomp_n_boot", c.gcomp_n_boot},
          {"gcomp_parametric", c.gcomp_parametric},
          {"mcmc_chains", c.mcmc_chains},
          {"mcmc_warmup", c.mcmc_warmup},
          {"mcmc_draws", c.mcmc_draws},
          {"weak_prior", c.weak_prior},
          {"n_star", c.n_star}};
}

}  // namespace

std::string settings_json(const ScenarioConfig& cfg) { return settings(cfg).dump(); }

std::string report_json(std::span<const ScenarioResult> results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& res : results) {
    nlohmann::json s = {{"scenario", res.config.name()},
                        {"n_ac", res.config.n_ac},
                        {"mu_ac", res.config.mu_ac},
                        {"n_replicates", res.config.n_replicates},
                        {"master_seed", res.config.master_seed},
                        {"seconds", res.seconds},
                        {"workers", res.config.workers},
                        {"settings", settings(res.config)},
                        {"warnings", res.report.warnings}};
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& mp : res.report.methods) {
      const auto& m = mp.metrics;
      nlohmann::json row = {{"method", to_string(mp.method)}, {"ATE", m.bias},  {"MCSE_ATE", m.mcse_bias},
                            {"LCI", m.lci},  {"UCI", m.uci},   {"VR", m.vr},
                            {"Cov", m.cov},  {"MCSE_Cov", m.mcse_cov}, {"ESE", m.ese},
                            {"MSE", m.mse},  {"MCSE_MSE", m.mcse_mse}, {"N_discarded", mp.n_discarded},
                            {"N_infeasible", mp.n_infeasible}, {"N_used", m.n}, {"max_abs_estimate", mp.max_abs_estimate}};
      if (m.ese > 0.0) row["standardized_bias_pct"] = standardized_bias(m);
      methods.push_back(row);
    }
    s["methods"] = methods;
    j.push_back(s);
  }
  return j.dump(2);
}

void write_replicates_csv(std::ostream& os, const ScenarioResult& result) {
  os.precision(17);
  os << "replicate,method,ok,estimate,se,lci,uci,failure\n";
  for (const auto& [method, recs] : result.records)
    for (std::size_t r = 0; r < recs.size(); ++r) {
      const auto& x = recs[r];
      os << r << "," << to_string(method) << "," << (x.ok ? 1 : 0) << "," << x.estimate << "," << x.se
         << "," << x.lci << "," << x.uci << ","
         << (x.failure == Failure::kInfeasible  ? "infeasible"
             : x.failure == Failure::kNumerical ? "numerical"
                                                : "")
         << "\n";
    }
}

std::map<Method, std::vector<ReplicateRecord>> read_replicates_csv(std::istream& is) {
  std::map<Method, std::vector<ReplicateRecord>> out;
  std::string line;
  if (!std::getline(is, line) || line.rfind("replicate,method", 0) != 0)
    throw ConfigError("replicates CSV: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_list(line);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw ConfigError("replicates CSV: expected 8 fields per row");
    const Method m = method_from_string(f[1]);
    auto& recs = out[m];
    const auto r = static_cast<std::size_t>(parse_int("replicate", f[0]));
    if (recs.size() <= r) recs.resize(r + 1);
    Failure failure = Failure::kNone;
    if (f[7] == "infeasible") failure = Failure::kInfeasible;
    else if (f[7] == "numerical") failure = Failure::kNumerical;
    else if (!f[7].empty()) throw ConfigError("replicates CSV: unknown failure '" + f[7] + "'");
    recs[r] = ReplicateRecord{f[2] == "1", parse_double("estimate", f[3]), parse_double("se", f[4]),
                              parse_double("lci", f[5]), parse_double("uci", f[6]), failure};
  }
  return out;
}

}  // namespace popadj
