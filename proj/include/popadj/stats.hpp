#pragma once

// Scalar and vector statistical helpers shared by every module.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <span>
#include <vector>

namespace popadj {

template <std::floating_point Scalar>
inline Scalar expit(Scalar x) {
  // Split by sign so neither branch overflows.
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <std::floating_point Scalar>
inline Scalar logit(Scalar p) {
  return std::log(p / (Scalar(1) - p));
}

/// Elementwise inverse logit of an array expression.
template <typename Derived>
inline Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> expit(
    const Eigen::ArrayBase<Derived>& eta) {
  using S = typename Derived::Scalar;
  // 1 / (1 + exp(-eta)) saturates cleanly to 0 or 1 at the extremes.
  return (S(1) + (-eta).exp()).inverse();
}

/// log(1 + exp(x)) without overflow.
template <std::floating_point Scalar>
inline Scalar log1p_exp(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double normal_cdf(double x);

/// Inverse standard normal CDF (Wichura AS241, relative error ~1e-16).
double normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Inverse of P(a, .) scaled by `scale`: the p-quantile of Gamma(shape=a, scale).
double gamma_quantile(double p, double a, double scale);

double mean(std::span<const double> v);

/// Sample variance with n-1 denominator.
double sample_variance(std::span<const double> v);

/// Type-7 (linear interpolation) empirical quantile, q in [0, 1].
double empirical_quantile(std::span<const double> v, double q);

/// Sample correlation matrix of the columns of x.
Eigen::MatrixXd correlation(const Eigen::MatrixXd& x);

/// Split-R-hat of one scalar quantity; chains given as equal-length vectors.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace popadj
