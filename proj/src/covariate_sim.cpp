#include "popadj/covariate_sim.hpp"

#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace popadj {

void validate(const MarginalSpec& m) {
  switch (m.family) {
    case Family::kBernoulli:
      if (!(m.prob > 0.0 && m.prob < 1.0)) throw ConfigError("Bernoulli marginal: p must lie in (0, 1)");
      return;
    case Family::kLognormal:
    case Family::kGamma:
      if (!(m.mean > 0.0)) throw ConfigError("lognormal/gamma marginal: mean must be positive");
      [[fallthrough]];
    case Family::kNormal:
      if (!(m.sd > 0.0)) throw ConfigError("marginal: SD must be positive");
      return;
    case Family::kTruncatedNormal:
      if (!(m.sd > 0.0)) throw ConfigError("truncated-normal marginal: SD must be positive");
      if (!(m.lower < m.upper)) throw ConfigError("truncated-normal marginal: lower must be below upper");
      return;
  }
}

double MarginalSpec::quantile(double u) const {
  switch (family) {
    case Family::kNormal:
      return mean + sd * normal_quantile(u);
    case Family::kLognormal: {
      const double s2 = std::log1p(sd * sd / (mean * mean));
      return std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * normal_quantile(u));
    }
    case Family::kGamma: {
      const double shape = (mean / sd) * (mean / sd);
      return gamma_quantile(u, shape, sd * sd / mean);
    }
    case Family::kBernoulli:
      return u > 1.0 - prob ? 1.0 : 0.0;
    case Family::kTruncatedNormal: {
      const double a = (lower - mean) / sd;
      const double b = (upper - mean) / sd;
      double x;
      if (a > 0.0) {
        // Work in upper-tail probabilities to keep precision above the mean.
        const double sa = normal_cdf(-a), sb = normal_cdf(-b);
        x = mean - sd * normal_quantile(sa - u * (sa - sb));
      } else {
        const double fa = normal_cdf(a), fb = normal_cdf(b);
        x = mean + sd * normal_quantile(fa + u * (fb - fa));
      }
      return std::clamp(x, lower, upper);
    }
  }
  return 0.0;
}

namespace {

void check_correlation(const Eigen::MatrixXd& corr, Eigen::Index k) {
  if (corr.rows() != k || corr.cols() != k)
    throw ConfigError("correlation matrix must be K x K with K = number of marginals");
  if (!corr.isApprox(corr.transpose(), 1e-12)) throw ConfigError("correlation matrix is not symmetric");
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    throw ConfigError("correlation matrix must have a unit diagonal");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(smallest > 0.0)) {
    std::ostringstream os;
    os << "correlation matrix is not positive definite (smallest eigenvalue " << smallest << ")";
    throw ConfigError(os.str());
  }
}

void check_size(int n_star, int min_n_star) {
  if (n_star < min_n_star)
    throw ConfigError("pseudo-population size " + std::to_string(n_star) + " is below the floor of " +
                      std::to_string(min_n_star));
}

}  // namespace

PseudoPopulation simulate_copula(const std::vector<MarginalSpec>& marginals,
                                 const Eigen::MatrixXd& corr, int n_star, std::uint64_t seed,
                                 int min_n_star) {
  check_size(n_star, min_n_star);
  const auto k = static_cast<Eigen::Index>(marginals.size());
  if (k == 0) throw ConfigError("copula needs at least one marginal");
  for (const auto& m : marginals) validate(m);
  check_correlation(corr, k);

  const Eigen::MatrixXd chol = corr.llt().matrixL();
  Engine eng = make_engine(seed);
  std::normal_distribution<double> std_normal;
  Eigen::MatrixXd latent(n_star, k);
  for (int i = 0; i < n_star; ++i)
    for (Eigen::Index j = 0; j < k; ++j) latent(i, j) = std_normal(eng);
  latent = latent * chol.transpose();

  constexpr double u_max = 1.0 - 0x1.0p-53;
  PseudoPopulation pop;
  pop.xstar.resize(n_star, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& m = marginals[static_cast<std::size_t>(j)];
    if (m.family == Family::kNormal) {
      // Phi followed by the normal quantile is the identity map.
      pop.xstar.col(j) = (m.mean + m.sd * latent.col(j).array()).matrix();
      continue;
    }
    for (int i = 0; i < n_star; ++i) {
      const double u = std::clamp(normal_cdf(latent(i, j)), std::numeric_limits<double>::min(), u_max);
      pop.xstar(i, j) = m.quantile(u);
    }
    if (m.family == Family::kTruncatedNormal &&
        ((pop.xstar.col(j).array() < m.lower).any() || (pop.xstar.col(j).array() > m.upper).any()))
      throw EstimationError("truncated-normal draw outside its bounds");
  }
  return pop;
}

PseudoPopulation simulate_factorized(const std::vector<ConditionalModel>& spec, int n_star,
                                     std::uint64_t seed, int min_n_star) {
  check_size(n_star, min_n_star);
  if (spec.empty()) throw ConfigError("factorized specification is empty");
  if (!spec.front().terms.empty())
    throw ConfigError("factorized specification: first covariate must be a pure marginal");
  const auto k = static_cast<Eigen::Index>(spec.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& m = spec[static_cast<std::size_t>(j)];
    if (m.family != Family::kNormal && m.family != Family::kBernoulli)
      throw ConfigError("factorized specification: covariate '" + m.name +
                        "' must be normal or Bernoulli");
    if (m.family == Family::kNormal && !(m.sd > 0.0))
      throw ConfigError("factorized specification: covariate '" + m.name + "' needs SD > 0");
    for (const auto& t : m.terms)
      if (t.parent < 0 || t.parent >= j)
        throw ConfigError("factorized specification: covariate '" + m.name +
                          "' references a covariate that is not simulated before it");
  }

  Engine eng = make_engine(seed);
  std::normal_distribution<double> std_normal;
  PseudoPopulation pop;
  pop.xstar.resize(n_star, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& m = spec[static_cast<std::size_t>(j)];
    Eigen::ArrayXd lp = Eigen::ArrayXd::Constant(n_star, m.intercept);
    for (const auto& t : m.terms) {
      const double c = t.center ? *t.center : pop.xstar.col(t.parent).mean();
      lp += t.coef * (pop.xstar.col(t.parent).array() - c);
    }
    if (m.family == Family::kNormal) {
      for (int i = 0; i < n_star; ++i) pop.xstar(i, j) = lp[i] + m.sd * std_normal(eng);
    } else {
      for (int i = 0; i < n_star; ++i) pop.xstar(i, j) = uniform01(eng) < expit(lp[i]) ? 1.0 : 0.0;
    }
  }
  return pop;
}

PseudoPopulation pseudo_population_from_ald(const AldSummary& ald, const IpdTrial* ipd, int n_star,
                                            std::uint64_t seed, int min_n_star) {
  validate(ald);
  check_size(n_star, min_n_star);
  Eigen::MatrixXd corr;
  if (ald.corr) {
    corr = *ald.corr;
  } else {
    if (ipd == nullptr)
      throw ConfigError("ALD correlation is 'from-IPD' but no IPD was supplied");
    if (ipd->k() != ald.cov_means.size())
      throw ConfigError("IPD and ALD have different numbers of covariates");
    corr = correlation(ipd->x);
  }
  std::vector<MarginalSpec> marginals;
  for (Eigen::Index j = 0; j < ald.cov_means.size(); ++j)
    marginals.push_back(MarginalSpec::normal(ald.cov_means[j], ald.cov_sds[j]));
  PseudoPopulation pop = simulate_copula(marginals, corr, n_star, seed, min_n_star);
  pop.em_idx = ald.em_idx;
  return pop;
}

}  // namespace popadj
