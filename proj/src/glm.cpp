#include "popadj/glm.hpp"

#include "popadj/error.hpp"
#include "popadj/stats.hpp"

#include <cmath>
#include <limits>

namespace popadj {

Eigen::Index DesignMatrix::column(ColumnRole role) const {
  for (std::size_t j = 0; j < column_roles.size(); ++j)
    if (column_roles[j] == role) return static_cast<Eigen::Index>(j);
  return -1;
}

namespace {

DesignMatrix assemble(const Eigen::MatrixXd& prognostic, const Eigen::VectorXd& z,
                      const Eigen::MatrixXd& modifiers) {
  const auto n = prognostic.rows();
  const auto k = prognostic.cols();
  const auto e = modifiers.cols();
  DesignMatrix d;
  d.m.resize(n, 1 + k + 1 + e);
  d.m.col(0).setOnes();
  d.m.middleCols(1, k) = prognostic;
  d.m.col(1 + k) = z;
  d.m.rightCols(e) = z.asDiagonal() * modifiers;
  d.column_roles.push_back(ColumnRole::kIntercept);
  d.column_roles.insert(d.column_roles.end(), static_cast<std::size_t>(k), ColumnRole::kPrognostic);
  d.column_roles.push_back(ColumnRole::kTreatment);
  d.column_roles.insert(d.column_roles.end(), static_cast<std::size_t>(e), ColumnRole::kInteraction);
  return d;
}

}  // namespace

DesignMatrix build_qmodel_design(const IpdTrial& trial) {
  validate(trial);
  return assemble(trial.x, trial.z, trial.x_em());
}

DesignMatrix build_centered_design(const IpdTrial& trial, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& theta_em) {
  validate(trial);
  if (theta.size() != trial.k())
    throw ConfigError("centered design: theta must have K entries");
  if (theta_em.size() != static_cast<Eigen::Index>(trial.em_idx.size()))
    throw ConfigError("centered design: theta_em must have |em| entries");
  const Eigen::MatrixXd xc = trial.x.rowwise() - theta.transpose();
  const Eigen::MatrixXd emc = trial.x_em().rowwise() - theta_em.transpose();
  return assemble(xc, trial.z, emc);
}

DesignMatrix build_treatment_design(const IpdTrial& trial) {
  DesignMatrix d;
  d.m.resize(trial.n(), 2);
  d.m.col(0).setOnes();
  d.m.col(1) = trial.z;
  d.column_roles = {ColumnRole::kIntercept, ColumnRole::kTreatment};
  return d;
}

namespace {

Eigen::VectorXd prior_precision(const Eigen::VectorXd& prior_sd, Eigen::Index p) {
  if (prior_sd.size() == 0) return Eigen::VectorXd::Zero(p);
  if (prior_sd.size() != p) throw ConfigError("prior_sd must have one entry per coefficient");
  if (!(prior_sd.array() > 0.0).all()) throw ConfigError("prior_sd entries must be positive");
  return prior_sd.array().square().inverse().matrix();
}

double loglik_at(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& coef, const Eigen::VectorXd& precision) {
  const auto e = eta.array();
  // log(1 + exp(eta)) = max(eta, 0) + log(1 + exp(-|eta|)).
  const Eigen::ArrayXd li = y.array() * e - (e.max(0.0) + (1.0 + (-e.abs()).exp()).log());
  const double ll = w.size() ? (w.array() * li).sum() : li.sum();
  return ll - 0.5 * (precision.array() * coef.array().square()).sum();
}

}  // namespace

double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& coef, const Eigen::VectorXd& weights,
                       const Eigen::VectorXd& prior_sd) {
  const Eigen::VectorXd precision = prior_precision(prior_sd, x.cols());
  return loglik_at(x * coef, y, weights, coef, precision);
}

GlmFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& weights, const Eigen::VectorXd& prior_sd,
                    const FitOptions& opt) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (y.size() != n) throw ConfigError("logistic fit: y length differs from design rows");
  if (weights.size() != 0) {
    if (weights.size() != n) throw ConfigError("logistic fit: weights length differs from design rows");
    if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0))
      throw ConfigError("logistic fit: weights must be nonnegative with a positive sum");
  }
  const Eigen::VectorXd precision = prior_precision(prior_sd, p);

  GlmFit fit;
  fit.coef = opt.start.size() == p ? opt.start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = x * fit.coef;
  double ll = loglik_at(eta, y, weights, fit.coef, precision);
  Eigen::MatrixXd info(p, p);
  Eigen::LLT<Eigen::MatrixXd> llt;

  auto information = [&](const Eigen::VectorXd& eta_now) {
    Eigen::ArrayXd mu = expit(eta_now.array());
    Eigen::ArrayXd v = mu * (1.0 - mu);
    if (weights.size()) v *= weights.array();
    Eigen::ArrayXd r = y.array() - mu;
    if (weights.size()) r *= weights.array();
    Eigen::VectorXd grad = x.transpose() * r.matrix() - (precision.array() * fit.coef.array()).matrix();
    info.noalias() = x.transpose() * (x.array().colwise() * v).matrix();
    info.diagonal() += precision;
    return grad;
  };

  for (fit.iterations = 0;; ++fit.iterations) {
    const Eigen::VectorXd grad = information(eta);
    fit.max_abs_gradient = grad.cwiseAbs().maxCoeff();
    if (fit.max_abs_gradient < opt.tolerance) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= opt.max_iterations) break;
    llt.compute(info);
    if (llt.info() != Eigen::Success)
      throw EstimationError("logistic fit: information matrix is singular (rank-deficient design)");
    const Eigen::VectorXd step = llt.solve(grad);

    // Step-halving until the objective does not decrease.
    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd trial_coef, trial_eta;
    double trial_ll = ll;
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      trial_coef = fit.coef + scale * step;
      trial_eta = x * trial_coef;
      trial_ll = loglik_at(trial_eta, y, weights, trial_coef, precision);
      if (trial_ll >= ll - 1e-12 * std::max(1.0, std::abs(ll))) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    fit.coef = trial_coef;
    eta = trial_eta;
    ll = trial_ll;
    if (fit.coef.cwiseAbs().maxCoeff() > opt.separation_threshold)
      throw SeparationError("logistic fit diverged (|coefficient| > " +
                            std::to_string(opt.separation_threshold) +
                            "): outcome separation in the data");
  }

  fit.loglik = ll;
  llt.compute(info);
  if (llt.info() != Eigen::Success)
    throw EstimationError("logistic fit: information matrix is singular at the optimum");
  fit.vcov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
  return fit;
}

Eigen::VectorXd predict_mu(const Eigen::VectorXd& coef, const DesignMatrix& design) {
  if (coef.size() != design.cols()) throw ConfigError("predict_mu: coefficient length mismatch");
  return expit((design.m * coef).array()).matrix();
}

}  // namespace popadj
