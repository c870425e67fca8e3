#include "popadj/trial_data.hpp"

#include "popadj/config.hpp"
#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace popadj {

Eigen::MatrixXd IpdTrial::x_em() const { return x(Eigen::all, em_idx); }

namespace {

bool is_binary(const Eigen::VectorXd& v) {
  return (v.array() == 0.0 || v.array() == 1.0).all();
}

void check_index_set(const IndexSet& idx, Eigen::Index k, const char* what) {
  if (idx.empty()) throw ConfigError(std::string(what) + ": effect-modifier set is empty");
  for (auto i : idx)
    if (i < 0 || i >= k)
      throw ConfigError(std::string(what) + ": effect-modifier index out of range");
  IndexSet sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError(std::string(what) + ": duplicate effect-modifier index");
}

}  // namespace

namespace {

void validate_structure(const IpdTrial& t) {
  const auto n = t.x.rows();
  if (t.z.size() != n || t.y.size() != n)
    throw ConfigError("IPD: x, z and y must have the same number of rows");
  if (!t.x.allFinite()) throw ConfigError("IPD: covariates contain missing or non-finite values");
  if (!is_binary(t.z)) throw ConfigError("IPD: treatment indicator must be 0/1");
  if (!is_binary(t.y)) throw ConfigError("IPD: outcome must be 0/1");
  check_index_set(t.em_idx, t.x.cols(), "IPD");
}

}  // namespace

void validate(const IpdTrial& t) {
  validate_structure(t);
  const auto n = t.x.rows();
  const auto p = t.x.cols() + static_cast<Eigen::Index>(t.em_idx.size()) + 2;
  if (n < p) throw ConfigError("IPD: need at least K + |EM| + 2 subjects");
}

Eigen::VectorXd AldSummary::theta_em() const { return cov_means(em_idx); }

void validate(const AldSummary& a) {
  const auto k = a.cov_means.size();
  if (a.cov_sds.size() != k) throw ConfigError("ALD: cov_means and cov_sds differ in length");
  if (!(a.cov_sds.array() > 0.0).all()) throw ConfigError("ALD: cov_sds must be positive");
  check_index_set(a.em_idx, k, "ALD");
  if (a.n_active < 0 || a.events_active < 0 || a.events_active > a.n_active)
    throw ConfigError("ALD: active-arm events must lie in [0, n_active]");
  if (a.n_control < 0 || a.events_control < 0 || a.events_control > a.n_control)
    throw ConfigError("ALD: control-arm events must lie in [0, n_control]");
  if (a.corr) {
    const auto& c = *a.corr;
    if (c.rows() != k || c.cols() != k) throw ConfigError("ALD: corr must be K x K");
    if (!c.isApprox(c.transpose(), 1e-12)) throw ConfigError("ALD: corr must be symmetric");
    if ((c.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
      throw ConfigError("ALD: corr must have unit diagonal");
    if (c.llt().info() != Eigen::Success) throw ConfigError("ALD: corr is not positive definite");
  }
}

int DgpConfig::n_control() const {
  return static_cast<int>(static_cast<long long>(n) * alloc_control / (alloc_active + alloc_control));
}

IndexSet DgpConfig::em_idx() const {
  IndexSet idx(static_cast<std::size_t>(n_em));
  std::iota(idx.begin(), idx.end(), static_cast<Eigen::Index>(k - n_em));
  return idx;
}

Eigen::MatrixXd DgpConfig::covariance() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(k, k, rho * sigma * sigma);
  s.diagonal().setConstant(sigma * sigma);
  return s;
}

void validate(const DgpConfig& c) {
  if (c.k < 1) throw ConfigError("DGP: k must be at least 1");
  if (c.n_em < 1 || c.n_em > c.k) throw ConfigError("DGP: n_em must lie in [1, k]");
  if (c.alloc_active < 1 || c.alloc_control < 1) throw ConfigError("DGP: allocation ratio must be positive");
  if (c.mu.size() != c.k) throw ConfigError("DGP: mu must have k entries");
  if (c.beta1.size() != c.k) throw ConfigError("DGP: beta1 must have k entries");
  if (c.beta2.size() != c.n_em) throw ConfigError("DGP: beta2 must have n_em entries");
  if (!(c.sigma > 0.0)) throw ConfigError("DGP: sigma must be positive");
  if (c.n_control() < 1 || c.n_active() < 1) throw ConfigError("DGP: both arms need at least one subject");
  if (c.n < c.k + c.n_em + 2) throw ConfigError("DGP: n must be at least k + n_em + 2");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance(), Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(smallest > 0.0)) {
    std::ostringstream os;
    os << "DGP: covariate covariance is not positive definite (smallest eigenvalue " << smallest
       << ")";
    throw ConfigError(os.str());
  }
}

namespace {

Eigen::VectorXd fit_vector(const std::string& key, const std::vector<double>& v, int size) {
  if (v.size() == 1) return Eigen::VectorXd::Constant(size, v.front());
  if (static_cast<int>(v.size()) != size)
    throw ConfigError("config key '" + key + "': expected 1 or " + std::to_string(size) + " values");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

std::string join(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

void apply_entries(DgpConfig& cfg, const std::map<std::string, std::string>& entries) {
  // Dimensions first so vector fields can broadcast against them.
  if (auto it = entries.find("k"); it != entries.end()) {
    cfg.k = parse_int(it->first, it->second);
    if (cfg.k < 1) throw ConfigError("config key 'k': must be at least 1");
    if (cfg.mu.size() != cfg.k) cfg.mu = Eigen::VectorXd::Constant(cfg.k, cfg.mu[0]);
    if (cfg.beta1.size() != cfg.k) cfg.beta1 = Eigen::VectorXd::Constant(cfg.k, cfg.beta1[0]);
  }
  if (auto it = entries.find("n_em"); it != entries.end()) {
    cfg.n_em = parse_int(it->first, it->second);
    if (cfg.n_em < 1) throw ConfigError("config key 'n_em': must be at least 1");
    if (cfg.beta2.size() != cfg.n_em) cfg.beta2 = Eigen::VectorXd::Constant(cfg.n_em, cfg.beta2[0]);
  }
  for (const auto& [key, value] : entries) {
    if (key == "k" || key == "n_em") continue;
    if (key == "n") {
      cfg.n = parse_int(key, value);
    } else if (key == "alloc_ratio") {
      const auto colon = value.find(':');
      if (colon == std::string::npos)
        throw ConfigError("config key 'alloc_ratio': expected 'active:control', got '" + value + "'");
      cfg.alloc_active = parse_int(key, value.substr(0, colon));
      cfg.alloc_control = parse_int(key, value.substr(colon + 1));
    } else if (key == "mu") {
      cfg.mu = fit_vector(key, parse_double_list(key, value), cfg.k);
    } else if (key == "sigma") {
      cfg.sigma = parse_double(key, value);
    } else if (key == "rho") {
      cfg.rho = parse_double(key, value);
    } else if (key == "beta0") {
      cfg.beta0 = parse_double(key, value);
    } else if (key == "beta1") {
      cfg.beta1 = fit_vector(key, parse_double_list(key, value), cfg.k);
    } else if (key == "beta2") {
      cfg.beta2 = fit_vector(key, parse_double_list(key, value), cfg.n_em);
    } else if (key == "betaz") {
      cfg.betaz = parse_double(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

DgpConfig dgp_config_from_entries(const std::map<std::string, std::string>& entries) {
  DgpConfig cfg;
  apply_entries(cfg, entries);
  validate(cfg);
  return cfg;
}

std::string to_config_text(const DgpConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "n = " << c.n << "\n"
     << "alloc_ratio = " << c.alloc_active << ":" << c.alloc_control << "\n"
     << "k = " << c.k << "\n"
     << "n_em = " << c.n_em << "\n"
     << "mu = " << join(c.mu) << "\n"
     << "sigma = " << c.sigma << "\n"
     << "rho = " << c.rho << "\n"
     << "beta0 = " << c.beta0 << "\n"
     << "beta1 = " << join(c.beta1) << "\n"
     << "beta2 = " << join(c.beta2) << "\n"
     << "betaz = " << c.betaz << "\n";
  return os.str();
}

IpdTrial generate_ipd(const DgpConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Engine eng = make_engine(seed);
  std::normal_distribution<double> std_normal;

  const Eigen::MatrixXd chol = cfg.covariance().llt().matrixL();
  IpdTrial t;
  t.em_idx = cfg.em_idx();
  Eigen::MatrixXd latent(cfg.n, cfg.k);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.k; ++j) latent(i, j) = std_normal(eng);
  t.x = (latent * chol.transpose()).rowwise() + cfg.mu.transpose();

  // Deterministic arm sizes, randomised order.
  t.z.resize(cfg.n);
  t.z.head(cfg.n_active()).setOnes();
  t.z.tail(cfg.n_control()).setZero();
  std::shuffle(t.z.begin(), t.z.end(), eng);

  const Eigen::VectorXd lp = (cfg.beta0 + (t.x * cfg.beta1).array() +
                              t.z.array() * (cfg.betaz + (t.x_em() * cfg.beta2).array()))
                                 .matrix();
  t.y.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) t.y[i] = uniform01(eng) < expit(lp[i]) ? 1.0 : 0.0;
  return t;
}

AldSummary aggregate(const IpdTrial& t) {
  // Summaries need no model fit, so the minimum-size rule does not apply.
  validate_structure(t);
  if (t.n() < 2) throw ConfigError("IPD: need at least two subjects to summarise");
  AldSummary a;
  a.cov_means = t.x.colwise().mean();
  const Eigen::MatrixXd centered = t.x.rowwise() - a.cov_means.transpose();
  a.cov_sds = (centered.colwise().squaredNorm() / static_cast<double>(t.n() - 1)).cwiseSqrt();
  a.em_idx = t.em_idx;
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    if (t.z[i] == 1.0) {
      ++a.n_active;
      a.events_active += static_cast<int>(t.y[i]);
    } else {
      ++a.n_control;
      a.events_control += static_cast<int>(t.y[i]);
    }
  }
  a.corr = correlation(t.x);
  return a;
}

MarginalEffect marginal_effect_from_counts(const AldSummary& ald) {
  const double a = ald.events_active;
  const double b = ald.n_active - ald.events_active;
  const double c = ald.events_control;
  const double d = ald.n_control - ald.events_control;
  const char* names[] = {"active events", "active non-events", "control events",
                         "control non-events"};
  const double cells[] = {a, b, c, d};
  for (int i = 0; i < 4; ++i)
    if (!(cells[i] > 0.0))
      throw EstimationError(std::string("2x2 table has an empty cell: ") + names[i]);
  MarginalEffect e;
  e.estimate = std::log(a * d / (b * c));
  e.variance = 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d;
  e.mu1 = a / (a + b);
  e.mu0 = c / (c + d);
  return e;
}

MarginalEffect marginal_effect_from_counts(const IpdTrial& t) {
  AldSummary a;
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    if (t.z[i] == 1.0) {
      ++a.n_active;
      a.events_active += static_cast<int>(t.y[i]);
    } else {
      ++a.n_control;
      a.events_control += static_cast<int>(t.y[i]);
    }
  }
  return marginal_effect_from_counts(a);
}

}  // namespace popadj
