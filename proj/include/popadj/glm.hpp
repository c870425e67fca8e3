#pragma once

// Logistic regression: outcome-model design matrices and a Newton/IRLS
// maximum-likelihood fitter with optional observation weights and an
// optional independent normal prior (ridge penalty).

#include "popadj/trial_data.hpp"

#include <Eigen/Dense>

#include <vector>

namespace popadj {

enum class ColumnRole { kIntercept, kPrognostic, kTreatment, kInteraction };

struct DesignMatrix {
  Eigen::MatrixXd m;
  std::vector<ColumnRole> column_roles;

  Eigen::Index rows() const { return m.rows(); }
  Eigen::Index cols() const { return m.cols(); }
  /// Index of the (single) column with the given role, or -1.
  Eigen::Index column(ColumnRole role) const;
};

/// Columns [1, x, z, z * x_em]: P = K + |em| + 2.
DesignMatrix build_qmodel_design(const IpdTrial& trial);

/// Columns [1, x - theta, z, z * (x_em - theta_em)].
DesignMatrix build_centered_design(const IpdTrial& trial, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& theta_em);

/// Columns [1, z].
DesignMatrix build_treatment_design(const IpdTrial& trial);

struct GlmFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcov;
  double loglik = 0.0;  ///< penalised when a prior was used
  bool converged = false;
  int iterations = 0;
  double max_abs_gradient = 0.0;
};

struct FitOptions {
  double tolerance = 1e-8;  ///< on the max-norm of the score
  int max_iterations = 100;
  double separation_threshold = 20.0;
  /// Starting coefficients; zero when empty.
  Eigen::VectorXd start;
};

/// Maximise sum_n w_n * loglik_n - sum_j beta_j^2 / (2 prior_sd_j^2).
/// Empty `weights` means unit weights; empty `prior_sd` means a flat prior
/// (entries may be +inf for unpenalised coefficients).
/// Throws SeparationError when a coefficient exceeds the separation
/// threshold, EstimationError when the information matrix is singular.
GlmFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& weights = {}, const Eigen::VectorXd& prior_sd = {},
                    const FitOptions& options = {});

inline GlmFit fit_logistic(const DesignMatrix& design, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& weights = {},
                           const Eigen::VectorXd& prior_sd = {}, const FitOptions& options = {}) {
  return fit_logistic(design.m, y, weights, prior_sd, options);
}

/// Log-likelihood (plus log prior kernel when prior_sd is non-empty).
double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& coef, const Eigen::VectorXd& weights = {},
                       const Eigen::VectorXd& prior_sd = {});

/// expit(design * coef).
Eigen::VectorXd predict_mu(const Eigen::VectorXd& coef, const DesignMatrix& design);

}  // namespace popadj
