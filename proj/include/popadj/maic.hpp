#pragma once

// Matching-adjusted indirect comparison: method-of-moments weights that
// balance effect-modifier means against published values, and a weighted
// outcome model with nonparametric bootstrap inference.

#include "popadj/effect.hpp"
#include "popadj/trial_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace popadj {

struct MaicWeights {
  Eigen::VectorXd w;      ///< exp((x_em - theta_em) . alpha), unnormalised
  Eigen::VectorXd alpha;  ///< log-weight coefficients
  double ess = 0.0;       ///< (sum w)^2 / sum w^2
  int iterations = 0;
  std::vector<std::string> warnings;

  /// Largest single weight as a share of the total.
  double max_weight_share() const { return w.maxCoeff() / w.sum(); }
};

/// Minimises sum_n exp((x_em_n - theta_em) . alpha) by damped Newton on its
/// logarithm until the weighted effect-modifier means match theta_em to
/// 1e-10. Throws InfeasibleError when theta_em is not inside the convex hull
/// of the observed effect modifiers.
MaicWeights estimate_weights(const Eigen::MatrixXd& x_em, const Eigen::VectorXd& theta_em);

inline MaicWeights estimate_weights(const IpdTrial& trial, const Eigen::VectorXd& theta_em) {
  return estimate_weights(trial.x_em(), theta_em);
}

/// Weighted treatment coefficient from a logistic regression of y on [1, z].
double maic_point_estimate(const IpdTrial& trial, const Eigen::VectorXd& weights);

/// Point estimate from the original data, variance from `n_boot` bootstrap
/// resamples with weights re-estimated in each. Resamples that fail are
/// dropped and counted; more than 5% dropped attaches a warning.
MarginalEffect maic_marginal_effect(const IpdTrial& trial, const Eigen::VectorXd& theta_em,
                                    int n_boot, std::uint64_t seed, unsigned workers = 1);

/// Multi-line CSV with ess, max weight share, and alpha_1..alpha_E.
std::string weight_diagnostics_csv(const MaicWeights& weights);

}  // namespace popadj
