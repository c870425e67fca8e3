#pragma once

// Simulation-study harness: the two-factor scenario grid (AC sample size x
// covariate overlap), replicate execution for every method, and performance
// measures with Monte Carlo standard errors.

#include "popadj/covariate_sim.hpp"
#include "popadj/effect.hpp"
#include "popadj/trial_data.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace popadj {

enum class Method { kBucher, kMaic, kStc, kGcompMl, kGcompBayes };

const char* to_string(Method m);
/// Accepts bucher, maic, stc, gcomp-ml, gcomp-bayes; throws ConfigError otherwise.
Method method_from_string(const std::string& name);
std::vector<Method> all_methods();

struct ScenarioConfig {
  int n_ac = 600;
  double mu_ac = 0.45;
  int n_bc = 600;
  double mu_bc = 0.6;
  double sigma = 0.4;
  double rho = 0.2;
  /// Outcome-model coefficients, k and n_em; n/mu/sigma/rho are overridden.
  DgpConfig dgp;
  int n_replicates = 2000;
  std::vector<Method> methods = all_methods();
  std::uint64_t master_seed = 20210101;
  bool override_grid = false;

  int maic_n_boot = 1000;
  int gcomp_n_boot = 1000;
  bool gcomp_parametric = false;
  int mcmc_chains = 2;
  int mcmc_warmup = 2000;
  int mcmc_draws = 4000;  ///< kept draws, summed over chains
  bool weak_prior = false;
  int n_star = kDefaultPseudoPopulation;
  unsigned workers = 1;

  DgpConfig ac_config() const;
  DgpConfig bc_config() const;
  std::string name() const;
};

void validate(const ScenarioConfig& cfg);

/// The nine study scenarios: N in {200, 400, 600} x mu_AC in {0.45, 0.30, 0.15}.
std::vector<ScenarioConfig> default_grid(const ScenarioConfig& base = {});

/// Scenario list from `key = value` entries (grid.n_ac / grid.mu_ac lists
/// expand to their cross product). Throws ConfigError naming unknown keys.
std::vector<ScenarioConfig> scenarios_from_entries(const std::map<std::string, std::string>& entries);

enum class Failure { kNone, kInfeasible, kNumerical };

struct ReplicateRecord {
  bool ok = false;
  double estimate = 0.0;
  double se = 0.0;
  double lci = 0.0;
  double uci = 0.0;
  Failure failure = Failure::kNone;
};

struct PerformanceMetrics {
  int n = 0;
  double bias = 0.0;  ///< reported as ATE; the truth is zero
  double mcse_bias = 0.0;
  double vr = 0.0;
  double cov = 0.0;
  double mcse_cov = 0.0;
  double lci = 0.0;  ///< average lower interval bound
  double uci = 0.0;
  double ese = 0.0;
  double mse = 0.0;
  double mcse_mse = 0.0;
};

PerformanceMetrics performance_measures(std::span<const double> estimates,
                                        std::span<const double> model_ses,
                                        std::span<const Interval> intervals, double truth = 0.0);

/// 100 * bias / ese.
double standardized_bias(const PerformanceMetrics& m);

struct MethodPerformance {
  Method method = Method::kBucher;
  PerformanceMetrics metrics;
  int n_discarded = 0;
  int n_infeasible = 0;  ///< discarded because no feasible weights exist
  double max_abs_estimate = 0.0;
};

struct PerformanceReport {
  std::vector<MethodPerformance> methods;
  std::vector<std::string> warnings;
  const MethodPerformance& at(Method m) const;
};

std::map<Method, double> standardized_bias(const PerformanceReport& report);

struct ScenarioResult {
  ScenarioConfig config;
  std::map<Method, std::vector<ReplicateRecord>> records;
  PerformanceReport report;
  double seconds = 0.0;
};

/// Truth for every scenario of the study is a null A vs. B effect.
inline constexpr double kTrueEffect = 0.0;

/// Results for one replicate; entries for methods that failed have ok = false.
std::map<Method, ReplicateRecord> run_replicate(const ScenarioConfig& cfg, int replicate);

ScenarioResult run_scenario(const ScenarioConfig& cfg,
                            const std::function<void(int)>& on_replicate = {});

PerformanceReport build_report(const std::map<Method, std::vector<ReplicateRecord>>& records);

/// One row per method: scenario, n_ac, mu_ac, method, ATE, MCSE_ATE, LCI,
/// UCI, VR, Cov, MCSE_Cov, ESE, MSE, MCSE_MSE, N_discarded.
void write_report_csv(std::ostream& os, std::span<const ScenarioResult> results);
std::string report_json(std::span<const ScenarioResult> results);
/// Everything except grid position, replicate count and seed that affects
/// replicate results, as a JSON object.
std::string settings_json(const ScenarioConfig& cfg);

/// Per-replicate estimates: replicate, method, ok, estimate, se, lci, uci,
/// failure (empty, infeasible or numerical).
void write_replicates_csv(std::ostream& os, const ScenarioResult& result);
std::map<Method, std::vector<ReplicateRecord>> read_replicates_csv(std::istream& is);

}  // namespace popadj
