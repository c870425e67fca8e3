#include "popadj/maic.hpp"

#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace popadj {

namespace {

constexpr double kBalanceTolerance = 1e-10;
constexpr int kMaxNewtonIterations = 200;

// log sum exp(s) and the normalised weights exp(s - lse).
double log_sum_exp(const Eigen::VectorXd& s, Eigen::VectorXd& p) {
  const double m = s.maxCoeff();
  p = (s.array() - m).exp().matrix();
  const double total = p.sum();
  p /= total;
  return m + std::log(total);
}

}  // namespace

MaicWeights estimate_weights(const Eigen::MatrixXd& x_em, const Eigen::VectorXd& theta_em) {
  const auto n = x_em.rows();
  const auto e = x_em.cols();
  if (theta_em.size() != e) throw ConfigError("MAIC: theta_em length differs from number of effect modifiers");
  if (n < 2) throw ConfigError("MAIC: need at least two subjects");

  MaicWeights out;
  for (Eigen::Index j = 0; j < e; ++j) {
    const double lo = x_em.col(j).minCoeff(), hi = x_em.col(j).maxCoeff();
    if (theta_em[j] < lo || theta_em[j] > hi) {
      std::ostringstream os;
      os << "MAIC: no feasible weights; target mean " << theta_em[j] << " of effect modifier " << j + 1
         << " lies outside the observed range [" << lo << ", " << hi << "]";
      throw InfeasibleError(os.str());
    }
    if (theta_em[j] == lo || theta_em[j] == hi)
      out.warnings.push_back("target mean of effect modifier " + std::to_string(j + 1) +
                             " lies on the boundary of the observed range");
  }

  const Eigen::MatrixXd c = x_em.rowwise() - theta_em.transpose();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(e);
  Eigen::VectorXd p;
  double f = log_sum_exp(c * alpha, p);
  auto infeasible = [&] {
    return InfeasibleError(
        "MAIC: no feasible weights; the target effect-modifier means lie outside the convex hull "
        "of the observed effect modifiers");
  };

  bool converged = false;
  int it = 0;
  for (; it < kMaxNewtonIterations; ++it) {
    // Gradient of log Q is the weighted mean imbalance; Hessian the weighted covariance.
    const Eigen::VectorXd g = c.transpose() * p;
    if (g.cwiseAbs().maxCoeff() < kBalanceTolerance) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd h = c.transpose() * p.asDiagonal() * c - g * g.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd dir;
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 1e-14).all())
      dir = -ldlt.solve(g);
    else
      dir = -g;
    double step = 1.0;
    const double slope = g.dot(dir);
    // Near the optimum the decrease drops below the rounding error of f.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    Eigen::VectorXd trial, p_trial;
    double f_trial = f;
    bool accepted = false;
    for (int h_it = 0; h_it < 60 && !accepted; ++h_it, step *= 0.5) {
      trial = alpha + step * dir;
      f_trial = log_sum_exp(c * trial, p_trial);
      accepted = f_trial <= f + 1e-4 * step * slope + slack;
    }
    if (!accepted) break;
    alpha = trial;
    p = p_trial;
    f = f_trial;
    // A feasible problem has min log Q = max entropy >= 0.
    if (f < -1e-12) throw infeasible();
  }
  if (!converged) throw infeasible();

  out.alpha = alpha;
  out.iterations = it;
  out.w = (c * alpha).array().exp().matrix();
  if (!out.w.allFinite()) throw infeasible();
  out.ess = out.w.sum() * out.w.sum() / out.w.squaredNorm();
  return out;
}

double maic_point_estimate(const IpdTrial& trial, const Eigen::VectorXd& weights) {
  if (weights.size() != trial.n()) throw ConfigError("MAIC: one weight per subject required");
  // The [1, z] logistic model is saturated: its weighted MLE is the
  // difference of the weighted log-odds in the two arms.
  double events[2] = {0.0, 0.0}, totals[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < trial.n(); ++i) {
    const int arm = trial.z[i] > 0.5;
    events[arm] += weights[i] * trial.y[i];
    totals[arm] += weights[i];
  }
  double coef[2];
  for (int arm = 0; arm < 2; ++arm) {
    if (!(events[arm] > 0.0) || !(events[arm] < totals[arm]))
      throw SeparationError("MAIC: weighted outcomes are all identical in the " +
                            std::string(arm ? "active" : "control") + " arm");
    coef[arm] = std::log(events[arm] / (totals[arm] - events[arm]));
  }
  const double effect = coef[1] - coef[0];
  if (!std::isfinite(effect) || std::abs(coef[0]) > 20.0 || std::abs(effect) > 20.0)
    throw SeparationError("MAIC: weighted outcome regression diverged");
  return effect;
}

MarginalEffect maic_marginal_effect(const IpdTrial& trial, const Eigen::VectorXd& theta_em,
                                    int n_boot, std::uint64_t seed, unsigned workers) {
  validate(trial);
  if (n_boot < 2) throw ConfigError("MAIC: need at least two bootstrap resamples");
  const Eigen::MatrixXd x_em = trial.x_em();
  const MaicWeights weights = estimate_weights(x_em, theta_em);

  MarginalEffect out;
  out.estimate = maic_point_estimate(trial, weights.w);
  out.warnings = weights.warnings;

  const auto n = trial.n();
  std::vector<double> draws(static_cast<std::size_t>(n_boot));
  std::vector<char> ok(static_cast<std::size_t>(n_boot), 0);
  parallel_for(static_cast<std::size_t>(n_boot), workers, [&](std::size_t b) {
    Engine eng = make_engine(derive_seed(seed, {key(Stage::kBootstrap), b}));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = pick(eng);
    IpdTrial resample;
    resample.x = trial.x(rows, Eigen::all);
    resample.em_idx = trial.em_idx;
    resample.z = trial.z(rows);
    resample.y = trial.y(rows);
    try {
      const MaicWeights wb = estimate_weights(x_em(rows, Eigen::all), theta_em);
      draws[b] = maic_point_estimate(resample, wb.w);
      ok[b] = 1;
    } catch (const EstimationError&) {
      // Counted below.
    }
  });

  for (std::size_t b = 0; b < draws.size(); ++b) {
    if (ok[b]) out.draws.push_back(draws[b]);
    else ++out.n_discarded;
  }
  if (out.draws.size() < 2) throw EstimationError("MAIC: fewer than two usable bootstrap resamples");
  if (out.n_discarded > 0.05 * n_boot)
    out.warnings.push_back(std::to_string(out.n_discarded) + " of " + std::to_string(n_boot) +
                           " bootstrap resamples discarded");
  out.variance = sample_variance(out.draws);
  out.percentile_interval = Interval{empirical_quantile(out.draws, 0.025),
                                     empirical_quantile(out.draws, 0.975)};
  return out;
}

std::string weight_diagnostics_csv(const MaicWeights& weights) {
  std::ostringstream os;
  os.precision(10);
  os << "quantity,value\n";
  os << "ess," << weights.ess << "\n";
  os << "max_weight_share," << weights.max_weight_share() << "\n";
  os << "n," << weights.w.size() << "\n";
  for (Eigen::Index j = 0; j < weights.alpha.size(); ++j)
    os << "alpha_" << j + 1 << "," << weights.alpha[j] << "\n";
  return os.str();
}

}  // namespace popadj
