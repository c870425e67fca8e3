#include "popadj/gcomp.hpp"

#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace popadj {

std::pair<double, double> absolute_outcomes(const MarginalEffect& effect) {
  if (!effect.mu1 || !effect.mu0)
    throw EstimationError(std::string("effect carries no absolute outcomes (") +
                          to_string(effect.estimand) + " estimate)");
  const double mu1 = *effect.mu1, mu0 = *effect.mu0;
  if (!(mu1 > 0.0 && mu1 < 1.0 && mu0 > 0.0 && mu0 < 1.0))
    throw EstimationError("absolute outcomes outside (0, 1)");
  return {mu1, mu0};
}

Eigen::VectorXd weakly_informative_prior_sd(const DesignMatrix& design) {
  Eigen::VectorXd sd(design.cols());
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const auto role = design.column_roles[static_cast<std::size_t>(j)];
    sd[j] = (role == ColumnRole::kTreatment || role == ColumnRole::kInteraction)
                ? 1.15
                : std::numeric_limits<double>::infinity();
  }
  return sd;
}

double marginal_log_or(double mu1, double mu0) { return logit(mu1) - logit(mu0); }

Standardizer::Standardizer(const PseudoPopulation& pseudo)
    : x_(pseudo.xstar),
      x_em_(pseudo.xstar(Eigen::all, pseudo.em_idx)),
      xf_(x_.cast<float>()),
      x_emf_(x_em_.cast<float>()) {}

namespace {

template <class Scalar>
void predict_arms(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x_em,
                  const Eigen::VectorXd& coef, Eigen::Array<Scalar, Eigen::Dynamic, 1>& p1,
                  Eigen::Array<Scalar, Eigen::Dynamic, 1>& p0) {
  const auto k = x.cols();
  const auto e = x_em.cols();
  if (coef.size() != k + e + 2) throw ConfigError("Standardizer: coefficient length mismatch");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b = coef.cast<Scalar>();
  p0.resize(x.rows());
  p0.matrix().noalias() = x * b.segment(1, k);
  p0 += b[0];
  p1 = p0 + b[1 + k];
  p1.matrix().noalias() += x_em * b.tail(e);
  p0 = (Scalar(1) + (-p0).exp()).inverse();
  p1 = (Scalar(1) + (-p1).exp()).inverse();
}

}  // namespace

void Standardizer::probabilities(const Eigen::VectorXd& coef, Eigen::ArrayXd& p1,
                                 Eigen::ArrayXd& p0) const {
  predict_arms(x_, x_em_, coef, p1, p0);
}

void Standardizer::probabilities(const Eigen::VectorXd& coef, Eigen::ArrayXf& p1,
                                 Eigen::ArrayXf& p0) const {
  predict_arms(xf_, x_emf_, coef, p1, p0);
}

std::pair<double, double> Standardizer::mean_probabilities(const Eigen::VectorXd& coef) const {
  Eigen::ArrayXd p1, p0;
  probabilities(coef, p1, p0);
  return {p1.mean(), p0.mean()};
}

namespace {

void check_compatible(const IpdTrial& trial, const PseudoPopulation& pseudo,
                      std::vector<std::string>& warnings) {
  if (pseudo.xstar.cols() != trial.k())
    throw ConfigError("pseudo-population and IPD have different numbers of covariates");
  if (pseudo.em_idx != trial.em_idx)
    throw ConfigError("pseudo-population and IPD disagree on the effect modifiers");
  for (Eigen::Index j = 0; j < pseudo.xstar.cols(); ++j) {
    const auto col = pseudo.xstar.col(j);
    if (col.maxCoeff() == col.minCoeff())
      warnings.push_back("pseudo-population covariate " + std::to_string(j + 1) + " has zero variance");
  }
}

void summarise_draws(MarginalEffect& out) {
  out.variance = sample_variance(out.draws);
  out.percentile_interval = Interval{empirical_quantile(out.draws, 0.025),
                                     empirical_quantile(out.draws, 0.975)};
}

}  // namespace

MarginalEffect stc_conventional(const IpdTrial& trial, const AldSummary& ald) {
  validate(ald);
  if (ald.em_idx != trial.em_idx) throw ConfigError("STC: IPD and ALD disagree on the effect modifiers");
  const DesignMatrix d = build_centered_design(trial, ald.cov_means, ald.theta_em());
  const GlmFit fit = fit_logistic(d, trial.y);
  if (!fit.converged) throw EstimationError("STC: outcome regression did not converge");
  const Eigen::Index j = d.column(ColumnRole::kTreatment);
  MarginalEffect out;
  out.estimate = fit.coef[j];
  out.variance = fit.vcov(j, j);
  out.estimand = Estimand::kConditional;
  return out;
}

MarginalEffect gcomp_ml(const IpdTrial& trial, const PseudoPopulation& pseudo,
                        const GcompConfig& cfg, std::uint64_t seed) {
  MarginalEffect out;
  const DesignMatrix design = build_qmodel_design(trial);
  check_compatible(trial, pseudo, out.warnings);
  const GlmFit fit = fit_logistic(design, trial.y);
  if (!fit.converged) throw EstimationError("G-computation: Q-model did not converge");

  const Standardizer standardizer(pseudo);
  const auto [mu1, mu0] = standardizer.mean_probabilities(fit.coef);
  out.mu1 = mu1;
  out.mu0 = mu0;
  out.estimate = marginal_log_or(mu1, mu0);

  const int n_draws = cfg.inference == MlInference::kBootstrap ? cfg.n_boot : cfg.n_param_sim;
  if (n_draws < 2) throw ConfigError("G-computation: need at least two resamples");
  std::vector<double> draws(static_cast<std::size_t>(n_draws));
  std::vector<char> ok(draws.size(), 0);

  if (cfg.inference == MlInference::kBootstrap) {
    const auto n = trial.n();
    FitOptions warm;
    warm.start = fit.coef;
    parallel_for(draws.size(), cfg.workers, [&](std::size_t b) {
      Engine eng = make_engine(derive_seed(seed, {key(Stage::kBootstrap), b}));
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
      for (auto& r : rows) r = pick(eng);
      try {
        const GlmFit fb = fit_logistic(design.m(rows, Eigen::all), trial.y(rows),
                                       {}, {}, warm);
        if (!fb.converged) return;
        const auto [m1, m0] = standardizer.mean_probabilities(fb.coef);
        draws[b] = marginal_log_or(m1, m0);
        ok[b] = std::isfinite(draws[b]);
      } catch (const EstimationError&) {
      }
    });
  } else {
    const Eigen::MatrixXd chol = fit.vcov.llt().matrixL();
    parallel_for(draws.size(), cfg.workers, [&](std::size_t b) {
      Engine eng = make_engine(derive_seed(seed, {key(Stage::kParamSim), b}));
      std::normal_distribution<double> std_normal;
      Eigen::VectorXd zeta(fit.coef.size());
      for (auto& v : zeta) v = std_normal(eng);
      const auto [m1, m0] = standardizer.mean_probabilities(fit.coef + chol * zeta);
      draws[b] = marginal_log_or(m1, m0);
      ok[b] = std::isfinite(draws[b]);
    });
  }

  for (std::size_t b = 0; b < draws.size(); ++b) {
    if (ok[b]) out.draws.push_back(draws[b]);
    else ++out.n_discarded;
  }
  if (out.draws.size() < 2) throw EstimationError("G-computation: fewer than two usable resamples");
  if (out.n_discarded > 0.05 * n_draws)
    out.warnings.push_back(std::to_string(out.n_discarded) + " of " + std::to_string(n_draws) +
                           " resamples discarded");
  summarise_draws(out);
  return out;
}

namespace {

struct ChainOutput {
  Eigen::MatrixXd coefs;  // n_keep x P
  std::vector<double> delta;
  std::vector<double> mu1;
  std::vector<double> mu0;
  double acceptance = 0.0;
};

// Adaptive random-walk Metropolis on the Q-model posterior followed by
// posterior-predictive imputation of binary outcomes for every kept draw.
ChainOutput run_chain(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& prior_sd, const GlmFit& mode,
                      const Standardizer& standardizer, const McmcConfig& mc, std::uint64_t seed,
                      std::size_t chain) {
  const auto p = x.cols();
  Engine eng = make_engine(derive_seed(seed, {key(Stage::kMcmc), chain}));
  std::normal_distribution<double> std_normal;
  auto mvn = [&](const Eigen::MatrixXd& chol) {
    Eigen::VectorXd zeta(p);
    for (auto& v : zeta) v = std_normal(eng);
    return Eigen::VectorXd(chol * zeta);
  };

  const double scale = mc.proposal_scale > 0.0 ? mc.proposal_scale : 2.38 * 2.38 / static_cast<double>(p);
  Eigen::MatrixXd prop_chol = (scale * mode.vcov).llt().matrixL();
  const Eigen::MatrixXd mode_chol = mode.vcov.llt().matrixL();

  Eigen::VectorXd current = mode.coef + mvn(mode_chol);
  double current_lp = logistic_loglik(x, y, current, {}, prior_sd);

  const int total = mc.n_warmup + mc.n_keep;
  Eigen::MatrixXd warm(std::max(mc.n_warmup, 1), p);
  ChainOutput out;
  out.coefs.resize(mc.n_keep, p);
  int accepted_kept = 0;
  for (int t = 0; t < total; ++t) {
    if (mc.adapt && t < mc.n_warmup && t >= 200 && t % 100 == 0) {
      // Empirical covariance of the later half of the warmup so far.
      const int from = t / 2;
      const Eigen::MatrixXd block = warm.middleRows(from, t - from);
      const Eigen::MatrixXd centered = block.rowwise() - block.colwise().mean();
      Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(block.rows() - 1);
      cov.diagonal().array() += 1e-10;
      Eigen::LLT<Eigen::MatrixXd> llt(scale * cov);
      if (llt.info() == Eigen::Success) prop_chol = llt.matrixL();
    }
    const Eigen::VectorXd proposal = current + mvn(prop_chol);
    const double proposal_lp = logistic_loglik(x, y, proposal, {}, prior_sd);
    const bool accept = std::log(uniform01(eng)) < proposal_lp - current_lp;
    if (accept) {
      current = proposal;
      current_lp = proposal_lp;
    }
    if (t < mc.n_warmup) {
      warm.row(t) = current.transpose();
    } else {
      out.coefs.row(t - mc.n_warmup) = current.transpose();
      accepted_kept += accept;
    }
  }
  out.acceptance = mc.n_keep > 0 ? static_cast<double>(accepted_kept) / mc.n_keep : 0.0;

  // Posterior predictive: impute y* under A and C for every pseudo-subject.
  Engine pred = make_engine(derive_seed(seed, {key(Stage::kPredictive), chain}));
  const auto n_star = standardizer.n_star();
  Eigen::ArrayXf p1, p0;
  for (Eigen::Index l = 0; l < mc.n_keep; ++l) {
    standardizer.probabilities(out.coefs.row(l).transpose(), p1, p0);
    p1 *= 0x1.0p32f;
    p0 *= 0x1.0p32f;
    long events1 = 0, events0 = 0;
    for (Eigen::Index i = 0; i < n_star; ++i) {
      const std::uint64_t r = pred();
      // Two 32-bit uniforms per engine call.
      events1 += static_cast<double>(r >> 32) < static_cast<double>(p1[i]);
      events0 += static_cast<double>(r & 0xffffffffULL) < static_cast<double>(p0[i]);
    }
    if (events1 == 0 || events1 == n_star || events0 == 0 || events0 == n_star)
      throw EstimationError("Bayesian G-computation: imputed outcomes are all identical in an arm");
    const double ybar1 = static_cast<double>(events1) / static_cast<double>(n_star);
    const double ybar0 = static_cast<double>(events0) / static_cast<double>(n_star);
    out.mu1.push_back(ybar1);
    out.mu0.push_back(ybar0);
    out.delta.push_back(marginal_log_or(ybar1, ybar0));
  }
  return out;
}

}  // namespace

MarginalEffect gcomp_bayes(const IpdTrial& trial, const PseudoPopulation& pseudo,
                           const GcompConfig& cfg, std::uint64_t seed,
                           BayesDiagnostics* diagnostics) {
  const McmcConfig& mc = cfg.mcmc;
  if (mc.n_chains < 1 || mc.n_keep < 2 || mc.n_warmup < 0)
    throw ConfigError("MCMC: need at least one chain and two kept draws");
  MarginalEffect out;
  const DesignMatrix design = build_qmodel_design(trial);
  check_compatible(trial, pseudo, out.warnings);

  // Posterior mode and curvature seed the chains and the initial proposal.
  const GlmFit mode = fit_logistic(design, trial.y, {}, cfg.prior_sd);
  const Standardizer standardizer(pseudo);

  std::vector<ChainOutput> chains(static_cast<std::size_t>(mc.n_chains));
  parallel_for(chains.size(), cfg.workers, [&](std::size_t c) {
    chains[c] = run_chain(design.m, trial.y, cfg.prior_sd, mode, standardizer, mc, seed, c);
  });

  const auto p = design.cols();
  std::vector<double> mu1, mu0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    out.draws.insert(out.draws.end(), ch.delta.begin(), ch.delta.end());
    mu1.insert(mu1.end(), ch.mu1.begin(), ch.mu1.end());
    mu0.insert(mu0.end(), ch.mu0.begin(), ch.mu0.end());
    if (ch.acceptance < 0.1 || ch.acceptance > 0.6)
      out.warnings.push_back("chain " + std::to_string(c + 1) + " acceptance rate " +
                             std::to_string(ch.acceptance) + " outside [0.1, 0.6]");
  }
  Eigen::VectorXd rhat(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& ch : chains)
      per_chain.emplace_back(ch.coefs.col(j).data(), ch.coefs.col(j).data() + ch.coefs.rows());
    rhat[j] = mc.n_keep >= 4 ? split_rhat(per_chain) : 1.0;
  }
  if ((rhat.array() > 1.05).any())
    out.warnings.push_back("split R-hat above 1.05 (max " + std::to_string(rhat.maxCoeff()) + ")");

  out.estimate = mean(out.draws);
  summarise_draws(out);
  out.mu1 = mean(mu1);
  out.mu0 = mean(mu0);

  if (diagnostics) {
    diagnostics->acceptance.clear();
    for (const auto& ch : chains) diagnostics->acceptance.push_back(ch.acceptance);
    diagnostics->rhat = rhat;
    diagnostics->coef_draws.resize(static_cast<Eigen::Index>(out.draws.size()), p);
    Eigen::Index row = 0;
    for (const auto& ch : chains) {
      diagnostics->coef_draws.middleRows(row, ch.coefs.rows()) = ch.coefs;
      row += ch.coefs.rows();
    }
    diagnostics->mu1_draws = Eigen::Map<const Eigen::VectorXd>(mu1.data(), static_cast<Eigen::Index>(mu1.size()));
    diagnostics->mu0_draws = Eigen::Map<const Eigen::VectorXd>(mu0.data(), static_cast<Eigen::Index>(mu0.size()));
  }
  return out;
}

void write_draws_csv(std::ostream& os, const MarginalEffect& effect,
                     const BayesDiagnostics* diagnostics) {
  const bool with_mu = diagnostics && diagnostics->mu1_draws.size() ==
                                          static_cast<Eigen::Index>(effect.draws.size());
  os.precision(17);
  os << "draw,delta" << (with_mu ? ",mu1,mu0" : "") << "\n";
  for (std::size_t i = 0; i < effect.draws.size(); ++i) {
    os << i + 1 << "," << effect.draws[i];
    if (with_mu)
      os << "," << diagnostics->mu1_draws[static_cast<Eigen::Index>(i)] << ","
         << diagnostics->mu0_draws[static_cast<Eigen::Index>(i)];
    os << "\n";
  }
}

}  // namespace popadj
