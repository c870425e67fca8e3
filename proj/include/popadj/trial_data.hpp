#pragma once

// Trial data model, the binary-outcome data-generating process used by the
// simulation study, and aggregation of subject-level data into published
// summaries.

#include "popadj/effect.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace popadj {

/// Zero-based column indices.
using IndexSet = std::vector<Eigen::Index>;

/// Subject-level data for the trial with IPD (active A vs. comparator C).
struct IpdTrial {
  Eigen::MatrixXd x;  ///< N x K baseline covariates
  IndexSet em_idx;    ///< effect-modifier columns of x
  Eigen::VectorXd z;  ///< 1 = active, 0 = comparator
  Eigen::VectorXd y;  ///< binary outcome

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index k() const { return x.cols(); }
  /// N x |em| block of effect-modifier columns.
  Eigen::MatrixXd x_em() const;
};

/// Throws ConfigError if any IpdTrial invariant is violated.
void validate(const IpdTrial& trial);

/// Published aggregate data for the trial without IPD (B vs. C).
struct AldSummary {
  Eigen::VectorXd cov_means;
  Eigen::VectorXd cov_sds;
  IndexSet em_idx;
  int events_active = 0;
  int n_active = 0;
  int events_control = 0;
  int n_control = 0;
  /// Explicit K x K correlation matrix; empty means "take it from the IPD".
  std::optional<Eigen::MatrixXd> corr;

  Eigen::VectorXd theta_em() const;
};

void validate(const AldSummary& ald);

/// Parameters of the logistic data-generating process.
struct DgpConfig {
  int n = 600;
  int alloc_active = 2;
  int alloc_control = 1;
  int k = 4;
  int n_em = 2;
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(4, 0.6);
  double sigma = 0.4;
  double rho = 0.2;
  double beta0 = -0.62;
  Eigen::VectorXd beta1 = Eigen::VectorXd::Constant(4, -std::log(0.5));
  Eigen::VectorXd beta2 = Eigen::VectorXd::Constant(2, -std::log(0.67));
  double betaz = std::log(0.17);

  int n_control() const;
  int n_active() const { return n - n_control(); }
  /// The last n_em covariates are the effect modifiers.
  IndexSet em_idx() const;
  Eigen::MatrixXd covariance() const;
};

void validate(const DgpConfig& cfg);

/// Apply `key = value` entries to a config. Scalars given for vector fields
/// (mu, beta1, beta2) are broadcast; changing k or n_em resizes them.
/// Throws ConfigError naming the offending key.
void apply_entries(DgpConfig& cfg, const std::map<std::string, std::string>& entries);
DgpConfig dgp_config_from_entries(const std::map<std::string, std::string>& entries);
std::string to_config_text(const DgpConfig& cfg);

IpdTrial generate_ipd(const DgpConfig& cfg, std::uint64_t seed);

AldSummary aggregate(const IpdTrial& trial);

/// Log odds ratio (active vs. control) and its delta-method variance from the
/// 2x2 table of an AldSummary. No continuity correction.
MarginalEffect marginal_effect_from_counts(const AldSummary& ald);

/// Same, directly from the 2x2 table of subject-level data.
MarginalEffect marginal_effect_from_counts(const IpdTrial& trial);

}  // namespace popadj
