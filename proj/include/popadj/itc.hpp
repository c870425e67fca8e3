#pragma once

// Anchored indirect comparison of A vs. B through the common comparator C.

#include "popadj/effect.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace popadj {

struct IndirectComparison {
  double estimate = 0.0;
  double variance = 0.0;
  double lci = 0.0;
  double uci = 0.0;
  std::string method;
  std::optional<std::string> draws_path;
};

/// A vs. B = (A vs. C) - (B vs. C); variances add; Wald interval at level
/// 1 - alpha.
IndirectComparison bucher(const MarginalEffect& d10, const MarginalEffect& d20, double alpha = 0.05);

/// Forward Monte Carlo: pairs `n_sim` draws resampled from d10_draws with
/// Normal(d20.estimate, d20.variance) draws and returns the differences.
std::vector<double> combine_draws(std::span<const double> d10_draws, const MarginalEffect& d20,
                                  int n_sim, std::uint64_t seed);

/// {"estimate", "variance", "lci", "uci", "method", "draws_path"?}
std::string to_json(const IndirectComparison& result);

}  // namespace popadj
