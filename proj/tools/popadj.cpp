// popadj: data generation, single-dataset analysis and simulation-study runs.

#include "popadj/config.hpp"
#include "popadj/covariate_sim.hpp"
#include "popadj/error.hpp"
#include "popadj/gcomp.hpp"
#include "popadj/io.hpp"
#include "popadj/itc.hpp"
#include "popadj/maic.hpp"
#include "popadj/rng.hpp"
#include "popadj/simstudy.hpp"
#include "popadj/trial_data.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace popadj;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 20210101;
  unsigned workers = 1;
  std::string method;
  std::string ipd;
  std::string ald;
  std::optional<int> n_boot;
  std::optional<int> mcmc_draws;
  std::optional<int> n_star;
  std::string draws_out;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
}

double event_rate(const IpdTrial& t, double arm) {
  double events = 0.0, n = 0.0;
  for (Eigen::Index i = 0; i < t.n(); ++i)
    if (t.z[i] == arm) {
      n += 1.0;
      events += t.y[i];
    }
  return n > 0.0 ? events / n : 0.0;
}

int cmd_gen_data(const Options& o) {
  ConfigEntries entries;
  if (!o.config.empty()) entries = read_config_file(o.config);
  const DgpConfig ac_cfg = dgp_config_from_entries(without_prefix(entries, "bc."));
  DgpConfig bc_cfg = ac_cfg;
  apply_entries(bc_cfg, with_prefix(entries, "bc."));
  validate(bc_cfg);

  const std::string out = o.out.empty() ? "." : o.out;
  ensure_dir(out);
  const IpdTrial ac = generate_ipd(ac_cfg, derive_seed(o.seed, {key(Stage::kAcTrial)}));
  const IpdTrial bc = generate_ipd(bc_cfg, derive_seed(o.seed, {key(Stage::kBcTrial)}));
  const AldSummary ald = aggregate(bc);

  std::ostringstream csv;
  write_ipd_csv(csv, ac);
  write_text_file((fs::path(out) / "ipd_ac.csv").string(), csv.str());
  write_text_file((fs::path(out) / "ald_bc.json").string(), ald_to_json(ald));

  std::cout << "AC IPD: " << ac_cfg.n_active() << " active, " << ac_cfg.n_control()
            << " control; event rates " << event_rate(ac, 1.0) << " / " << event_rate(ac, 0.0) << "\n"
            << "BC ALD: " << ald.n_active << " active, " << ald.n_control << " control; event rates "
            << static_cast<double>(ald.events_active) / ald.n_active << " / "
            << static_cast<double>(ald.events_control) / ald.n_control << "\n"
            << "wrote " << (fs::path(out) / "ipd_ac.csv").string() << " and "
            << (fs::path(out) / "ald_bc.json").string() << "\n";
  return kExitOk;
}

GcompConfig analysis_config(const ConfigEntries& entries, const Options& o, int& n_star, const IpdTrial& ac) {
  GcompConfig gc;
  bool weak = false;
  int draws = gc.mcmc.n_chains * gc.mcmc.n_keep;
  for (const auto& [k, v] : entries) {
    if (k == "n_boot") gc.n_boot = parse_int(k, v);
    else if (k == "inference") {
      if (v == "bootstrap") gc.inference = MlInference::kBootstrap;
      else if (v == "parametric-simulation") gc.inference = MlInference::kParametricSimulation;
      else throw ConfigError("config key 'inference': expected bootstrap or parametric-simulation");
    } else if (k == "n_param_sim") gc.n_param_sim = parse_int(k, v);
    else if (k == "mcmc.chains") gc.mcmc.n_chains = parse_int(k, v);
    else if (k == "mcmc.warmup") gc.mcmc.n_warmup = parse_int(k, v);
    else if (k == "mcmc.draws") draws = parse_int(k, v);
    else if (k == "mcmc.proposal_scale") gc.mcmc.proposal_scale = parse_double(k, v);
    else if (k == "mcmc.adapt") gc.mcmc.adapt = parse_bool(k, v);
    else if (k == "prior") {
      if (v == "flat") weak = false;
      else if (v == "weak") weak = true;
      else throw ConfigError("config key 'prior': expected flat or weak");
    } else if (k == "n_star") n_star = parse_int(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (o.n_boot) gc.n_boot = gc.n_param_sim = *o.n_boot;
  if (o.mcmc_draws) draws = *o.mcmc_draws;
  if (o.n_star) n_star = *o.n_star;
  if (gc.mcmc.n_chains < 1 || draws < 2 * gc.mcmc.n_chains) throw ConfigError("invalid MCMC draw count");
  gc.mcmc.n_keep = draws / gc.mcmc.n_chains;
  if (weak) gc.prior_sd = weakly_informative_prior_sd(build_qmodel_design(ac));
  return gc;
}

int cmd_analyze(const Options& o) {
  const Method method = method_from_string(o.method);
  ConfigEntries entries;
  if (!o.config.empty()) entries = read_config_file(o.config);
  const AldSummary ald = ald_from_json(read_text_file(o.ald));
  std::istringstream ipd_text(read_text_file(o.ipd));
  const IpdTrial ac = read_ipd_csv(ipd_text, ald.em_idx);
  if (ac.k() != ald.cov_means.size())
    throw ConfigError("IPD has " + std::to_string(ac.k()) + " covariates but ALD has " +
                      std::to_string(ald.cov_means.size()));
  int n_star = kDefaultPseudoPopulation;
  const GcompConfig gc = analysis_config(entries, o, n_star, ac);

  const MarginalEffect d20 = marginal_effect_from_counts(ald);
  const std::uint64_t method_seed = derive_seed(o.seed, {100 + static_cast<std::uint64_t>(method)});
  nlohmann::ordered_json diag;
  MarginalEffect d10;
  BayesDiagnostics bayes;
  switch (method) {
    case Method::kBucher: d10 = marginal_effect_from_counts(ac); break;
    case Method::kMaic: {
      const MaicWeights w = estimate_weights(ac, ald.theta_em());
      diag["ess"] = w.ess;
      diag["max_weight_share"] = w.max_weight_share();
      diag["alpha"] = std::vector<double>(w.alpha.data(), w.alpha.data() + w.alpha.size());
      d10 = maic_marginal_effect(ac, ald.theta_em(), o.n_boot.value_or(1000), method_seed);
      break;
    }
    case Method::kStc: d10 = stc_conventional(ac, ald); break;
    case Method::kGcompMl:
    case Method::kGcompBayes: {
      const PseudoPopulation pseudo =
          pseudo_population_from_ald(ald, &ac, n_star, derive_seed(o.seed, {key(Stage::kPseudo)}));
      diag["n_star"] = pseudo.n_star();
      if (method == Method::kGcompMl) {
        d10 = gcomp_ml(ac, pseudo, gc, method_seed);
      } else {
        d10 = gcomp_bayes(ac, pseudo, gc, method_seed, &bayes);
        diag["acceptance"] = bayes.acceptance;
        diag["rhat"] = std::vector<double>(bayes.rhat.data(), bayes.rhat.data() + bayes.rhat.size());
      }
      break;
    }
  }
  IndirectComparison result = bucher(d10, d20);
  result.method = to_string(method);
  if (!o.draws_out.empty()) {
    if (d10.draws.empty()) throw ConfigError("--draws-out: method " + result.method + " produces no draws");
    std::ostringstream csv;
    write_draws_csv(csv, d10, method == Method::kGcompBayes ? &bayes : nullptr);
    write_text_file(o.draws_out, csv.str());
    result.draws_path = o.draws_out;
  }

  auto j = nlohmann::ordered_json::parse(to_json(result));
  diag["estimand"] = to_string(d10.estimand);
  diag["d_ac"] = {{"estimate", d10.estimate}, {"variance", d10.variance}};
  diag["d_bc"] = {{"estimate", d20.estimate}, {"variance", d20.variance}};
  if (d10.mu1) diag["mu1"] = *d10.mu1;
  if (d10.mu0) diag["mu0"] = *d10.mu0;
  if (!d10.draws.empty()) diag["n_draws"] = d10.draws.size();
  diag["n_discarded"] = d10.n_discarded;
  diag["warnings"] = d10.warnings;
  j["estimand"] = to_string(d10.estimand);
  j["diagnostics"] = diag;
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) std::cout << text;
  else write_text_file(o.out, text);
  for (const auto& w : d10.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_simstudy(const Options& o, const CLI::App& sub) {
  ConfigEntries entries;
  if (!o.config.empty()) entries = read_config_file(o.config);
  if (sub.count("--seed")) entries["master_seed"] = std::to_string(o.seed);
  if (o.n_boot) entries["n_boot"] = std::to_string(*o.n_boot);
  if (o.mcmc_draws) entries["gcomp_bayes.draws"] = std::to_string(*o.mcmc_draws);
  if (o.n_star) entries["n_star"] = std::to_string(*o.n_star);
  entries["workers"] = std::to_string(o.workers);
  const auto scenarios = scenarios_from_entries(entries);

  const std::string out = o.out.empty() ? "simstudy_out" : o.out;
  ensure_dir(out);
  std::vector<ScenarioResult> results;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& cfg = scenarios[s];
    std::atomic<int> done{0};
    std::mutex mu;
    const int step = std::max(1, cfg.n_replicates / 10);
    ScenarioResult res = run_scenario(cfg, [&](int) {
      const int d = ++done;
      if (d % step == 0) {
        std::lock_guard lock(mu);
        std::cerr << "  " << cfg.name() << ": " << d << "/" << cfg.n_replicates << "\r" << std::flush;
      }
    });
    write_scenario_outputs(out, res);
    std::cerr << "[" << s + 1 << "/" << scenarios.size() << "] " << cfg.name() << " done in "
              << res.seconds << " s\n";
    for (const auto& w : res.report.warnings) std::cerr << "  warning: " << w << "\n";
    results.push_back(std::move(res));
  }
  std::ostringstream combined;
  write_report_csv(combined, results);
  write_text_file((fs::path(out) / "report.csv").string(), combined.str());
  write_text_file((fs::path(out) / "report.json").string(), report_json(results) + "\n");
  std::cout << combined.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population-adjusted anchored indirect treatment comparisons"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "Master seed")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "Simulate an AC IPD trial and a BC aggregate summary");
  gen->add_option("--config", o.config, "DGP config (key = value or JSON); bc.* keys override the BC trial");
  gen->add_option("--out", o.out, "Output directory");
  gen->add_option("--seed", o.seed, "Seed");

  auto* an = app.add_subcommand("analyze", "Estimate the A vs. B effect from IPD and ALD files");
  an->add_option("--ipd", o.ipd, "AC IPD CSV (x1..xK,z,y)")->required();
  an->add_option("--ald", o.ald, "BC ALD JSON")->required();
  an->add_option("--method", o.method, "bucher | maic | stc | gcomp-ml | gcomp-bayes")->required();
  an->add_option("--config", o.config, "Method options (key = value or JSON)");
  an->add_option("--out", o.out, "Write the JSON result here instead of stdout");
  an->add_option("--seed", o.seed, "Seed");
  an->add_option("--n-boot", o.n_boot, "Bootstrap resamples");
  an->add_option("--mcmc-draws", o.mcmc_draws, "Kept MCMC draws over all chains");
  an->add_option("--n-star", o.n_star, "Pseudo-population size");
  an->add_option("--draws-out", o.draws_out, "CSV path for bootstrap or posterior draws");

  auto* sim = app.add_subcommand("simstudy", "Run the simulation-study scenario grid");
  sim->add_option("--config", o.config, "Scenario config (key = value or JSON)");
  sim->add_option("--out", o.out, "Output directory");
  sim->add_option("--seed", o.seed, "Master seed");
  sim->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  sim->add_option("--n-boot", o.n_boot, "Bootstrap resamples for MAIC and ML G-computation");
  sim->add_option("--mcmc-draws", o.mcmc_draws, "Kept MCMC draws over all chains");
  sim->add_option("--n-star", o.n_star, "Pseudo-population size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*an) return cmd_analyze(o);
    return cmd_simstudy(o, *sim);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (*an && std::string(e.what()).rfind("unknown method", 0) == 0) std::cerr << an->help();
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const EstimationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
