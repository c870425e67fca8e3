#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace popadj {

enum class Estimand { kMarginal, kConditional };

inline const char* to_string(Estimand e) {
  return e == Estimand::kMarginal ? "marginal" : "conditional";
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// A relative treatment effect on the log-odds-ratio scale.
struct MarginalEffect {
  double estimate = 0.0;
  double variance = 0.0;
  /// Bootstrap replicates or posterior draws, in generation order.
  std::vector<double> draws;
  /// Absolute outcome probabilities under active treatment and under control.
  std::optional<double> mu1;
  std::optional<double> mu0;
  std::optional<Interval> percentile_interval;
  Estimand estimand = Estimand::kMarginal;
  /// Resamples or draws dropped because estimation failed on them.
  int n_discarded = 0;
  std::vector<std::string> warnings;
};

/// Returns (mu1, mu0); throws EstimationError if the effect carries no
/// absolute outcomes (for example a conventional STC result).
std::pair<double, double> absolute_outcomes(const MarginalEffect& effect);

}  // namespace popadj
