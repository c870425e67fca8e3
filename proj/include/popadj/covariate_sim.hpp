#pragma once

// Construction of a pseudo-population for the aggregate-data trial, either
// through a Gaussian copula over chosen marginals or through a sequence of
// conditional models p(x1) p(x2 | x1) p(x3 | x1, x2) ...

#include "popadj/trial_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace popadj {

inline constexpr int kDefaultPseudoPopulation = 10000;
inline constexpr int kMinPseudoPopulation = 1000;

struct PseudoPopulation {
  Eigen::MatrixXd xstar;  ///< N* x K
  IndexSet em_idx;
  Eigen::Index n_star() const { return xstar.rows(); }
};

enum class Family { kNormal, kLognormal, kGamma, kBernoulli, kTruncatedNormal };

/// One covariate's marginal law. Normal-type families use (mean, sd) on the
/// natural scale; truncated-normal treats them as pre-truncation parameters.
struct MarginalSpec {
  Family family = Family::kNormal;
  double mean = 0.0;
  double sd = 1.0;
  double prob = 0.5;  ///< Bernoulli only
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  static MarginalSpec normal(double mean, double sd) { return {Family::kNormal, mean, sd}; }
  static MarginalSpec lognormal(double mean, double sd) { return {Family::kLognormal, mean, sd}; }
  static MarginalSpec gamma(double mean, double sd) { return {Family::kGamma, mean, sd}; }
  static MarginalSpec bernoulli(double p) { return {Family::kBernoulli, 0.0, 1.0, p}; }
  static MarginalSpec truncated_normal(double mean, double sd, double lo, double hi) {
    return {Family::kTruncatedNormal, mean, sd, 0.5, lo, hi};
  }

  /// Inverse CDF at u in (0, 1).
  double quantile(double u) const;
};

void validate(const MarginalSpec& m);

PseudoPopulation simulate_copula(const std::vector<MarginalSpec>& marginals,
                                 const Eigen::MatrixXd& corr, int n_star, std::uint64_t seed,
                                 int min_n_star = kMinPseudoPopulation);

/// Covariate j of a factorized specification. The linear predictor is
/// intercept + sum_t coef_t * (x_{parent_t} - center_t), mapped through the
/// family's inverse link (identity for normal, logit for Bernoulli). A
/// missing center means the sample mean of the already-simulated parent.
struct ConditionalModel {
  struct Term {
    Eigen::Index parent = 0;
    double coef = 0.0;
    std::optional<double> center;
  };
  std::string name;
  Family family = Family::kNormal;  ///< kNormal or kBernoulli
  double intercept = 0.0;
  double sd = 1.0;  ///< residual SD, normal family only
  std::vector<Term> terms;
};

PseudoPopulation simulate_factorized(const std::vector<ConditionalModel>& spec, int n_star,
                                     std::uint64_t seed, int min_n_star = kMinPseudoPopulation);

/// Normal marginals from the ALD means/SDs with the ALD correlation matrix,
/// or with the IPD sample correlations when the ALD does not carry one.
PseudoPopulation pseudo_population_from_ald(const AldSummary& ald, const IpdTrial* ipd,
                                            int n_star, std::uint64_t seed,
                                            int min_n_star = kMinPseudoPopulation);

}  // namespace popadj
