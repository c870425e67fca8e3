#include "doctest.h"

#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

using namespace popadj;
using doctest::Approx;

TEST_CASE("expit and logit") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(1.0) == Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(expit(-0.62) == Approx(0.34977).epsilon(1e-4));
  CHECK(expit(-800.0) == 0.0);
  CHECK(expit(800.0) == 1.0);
  CHECK(logit(expit(2.5)) == Approx(2.5).epsilon(1e-12));
  const Eigen::ArrayXd eta = Eigen::ArrayXd::LinSpaced(5, -3.0, 3.0);
  const Eigen::ArrayXd p = expit(eta);
  for (Eigen::Index i = 0; i < eta.size(); ++i) CHECK(p[i] == Approx(expit(eta[i])).epsilon(1e-14));
  CHECK(log1p_exp(1000.0) == Approx(1000.0));
  CHECK(log1p_exp(0.0) == Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("normal quantile against reference values") {
  const std::vector<std::pair<double, double>> ref = {
      {1e-10, -6.361340902404056}, {0.001, -3.090232306167813}, {0.025, -1.9599639845400545},
      {0.3, -0.5244005127080409},  {0.5, 0.0},                  {0.9, 1.2815515655446004},
      {0.975, 1.959963984540054},  {1 - 1e-12, 7.0344869100478356}};
  for (auto [p, q] : ref) CHECK(normal_quantile(p) == Approx(q).epsilon(1e-9));
  CHECK(normal_cdf(normal_quantile(0.123)) == Approx(0.123).epsilon(1e-12));
}

TEST_CASE("regularized incomplete gamma and its inverse") {
  CHECK(gamma_p(0.5, 0.3) == Approx(0.5614219739190003).epsilon(1e-10));
  CHECK(gamma_p(2.5, 1.0) == Approx(0.15085496391539038).epsilon(1e-10));
  CHECK(gamma_p(10.0, 12.0) == Approx(0.7576078383294875).epsilon(1e-10));
  CHECK(gamma_p(3.0, 0.01) == Approx(1.6542165280748778e-07).epsilon(1e-8));
  CHECK(gamma_quantile(0.1, 0.5, 1.0) == Approx(0.00789538704671561).epsilon(1e-8));
  CHECK(gamma_quantile(0.5, 2.5, 1.0) == Approx(2.175730095547763).epsilon(1e-9));
  CHECK(gamma_quantile(0.99, 10.0, 1.0) == Approx(18.783117393312533).epsilon(1e-9));
  CHECK(gamma_quantile(0.001, 3.0, 2.0) == Approx(2.0 * 0.1905333775684032).epsilon(1e-9));
}

TEST_CASE("moments, quantiles and correlation") {
  const std::vector<double> v = {0.2, -0.2, 0.1, -0.1};
  CHECK(mean(v) == Approx(0.0));
  CHECK(sample_variance(v) == Approx(0.1 / 3.0));
  const std::vector<double> q = {1, 2, 3, 4, 5};
  CHECK(empirical_quantile(q, 0.0) == 1.0);
  CHECK(empirical_quantile(q, 0.5) == 3.0);
  CHECK(empirical_quantile(q, 0.1) == Approx(1.4));
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8.5;
  const Eigen::MatrixXd c = correlation(x);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == Approx(0.9983814394570298).epsilon(1e-12));
}

TEST_CASE("split R-hat matches an independent implementation") {
  const std::vector<std::vector<double>> chains = {
      {2.041, -2.556, 0.418, -0.568, -0.453, -0.216, -2.02, -0.232, -0.865, 3.323},
      {0.526, -0.053, 0.019, -0.368, -0.755, -0.091, 0.782, 0.061, 1.258, 0.1}};
  CHECK(split_rhat(chains) == Approx(0.9187548230955593).epsilon(1e-12));
}

TEST_CASE("KS distance") {
  CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_distance({1, 2}, {3, 4}) == 1.0);
  CHECK(ks_distance({1, 2, 3, 4}, {3, 4, 5, 6}) == Approx(0.5));
}

TEST_CASE("seed derivation and engines") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  Engine a = make_engine(42), b = make_engine(42);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  Engine c = make_engine(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(c);
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (unsigned workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 5) throw EstimationError("boom");
                               }),
                  EstimationError);
}
