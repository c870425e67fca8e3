#pragma once

// Outcome-regression estimators of the A vs. C effect in the aggregate-data
// population: conventional STC (a conditional effect, kept as the biased
// comparator) and parametric G-computation by maximum likelihood or by
// Bayesian posterior-predictive simulation.

#include "popadj/covariate_sim.hpp"
#include "popadj/effect.hpp"
#include "popadj/glm.hpp"
#include "popadj/trial_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <utility>

namespace popadj {

enum class MlInference { kBootstrap, kParametricSimulation };

struct McmcConfig {
  int n_chains = 2;
  int n_warmup = 2000;
  int n_keep = 2000;
  /// Multiplier applied to the proposal covariance; 0 selects 2.38^2 / P.
  double proposal_scale = 0.0;
  bool adapt = true;
};

struct GcompConfig {
  int n_boot = 1000;
  MlInference inference = MlInference::kBootstrap;
  int n_param_sim = 1000;
  McmcConfig mcmc;
  /// Normal prior SDs per Q-model coefficient for the Bayesian fit; empty
  /// means an improper flat prior.
  Eigen::VectorXd prior_sd;
  unsigned workers = 1;
};

/// Prior SDs of 1.15 on the treatment and interaction coefficients of a
/// Q-model design, flat (infinite SD) elsewhere.
Eigen::VectorXd weakly_informative_prior_sd(const DesignMatrix& design);

/// Averages inverse-logit predictions of a Q-model over a pseudo-population
/// with treatment set to A and to C. Coefficients follow the Q-model column
/// order [b0, b1 (K), bz, b2 (|em|)].
class Standardizer {
 public:
  explicit Standardizer(const PseudoPopulation& pseudo);

  /// (mu1, mu0): mean predicted probability under A and under C.
  std::pair<double, double> mean_probabilities(const Eigen::VectorXd& coef) const;

  /// Per-subject predicted probabilities under A (p1) and under C (p0).
  void probabilities(const Eigen::VectorXd& coef, Eigen::ArrayXd& p1, Eigen::ArrayXd& p0) const;
  /// Single precision, for outcome imputation.
  void probabilities(const Eigen::VectorXd& coef, Eigen::ArrayXf& p1, Eigen::ArrayXf& p0) const;
  Eigen::Index n_star() const { return x_.rows(); }

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd x_em_;
  Eigen::MatrixXf xf_;
  Eigen::MatrixXf x_emf_;
};

/// logit(mu1) - logit(mu0).
double marginal_log_or(double mu1, double mu0);

/// Conventional STC: treatment coefficient of the outcome model with
/// covariates centred at the published means. Tagged as conditional.
MarginalEffect stc_conventional(const IpdTrial& trial, const AldSummary& ald);

MarginalEffect gcomp_ml(const IpdTrial& trial, const PseudoPopulation& pseudo,
                        const GcompConfig& cfg, std::uint64_t seed);

struct BayesDiagnostics {
  std::vector<double> acceptance;  ///< per chain, after warmup
  Eigen::VectorXd rhat;            ///< split-R-hat per coefficient
  Eigen::MatrixXd coef_draws;      ///< (chains * n_keep) x P, chain-major
  Eigen::VectorXd mu1_draws;
  Eigen::VectorXd mu0_draws;
};

MarginalEffect gcomp_bayes(const IpdTrial& trial, const PseudoPopulation& pseudo,
                           const GcompConfig& cfg, std::uint64_t seed,
                           BayesDiagnostics* diagnostics = nullptr);

/// CSV with one row per draw: draw, delta and, when available, mu1, mu0.
void write_draws_csv(std::ostream& os, const MarginalEffect& effect,
                     const BayesDiagnostics* diagnostics = nullptr);

}  // namespace popadj
