#include "popadj/itc.hpp"

#include "popadj/error.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include "json.hpp"

#include <cmath>

namespace popadj {

IndirectComparison bucher(const MarginalEffect& d10, const MarginalEffect& d20, double alpha) {
  if (!(std::isfinite(d10.variance) && std::isfinite(d20.variance)) || d10.variance < 0.0 ||
      d20.variance < 0.0)
    throw ConfigError("indirect comparison: variances must be finite and nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("indirect comparison: alpha must lie in (0, 1)");
  IndirectComparison r;
  r.estimate = d10.estimate - d20.estimate;
  r.variance = d10.variance + d20.variance;
  const double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(r.variance);
  r.lci = r.estimate - half;
  r.uci = r.estimate + half;
  return r;
}

std::vector<double> combine_draws(std::span<const double> d10_draws, const MarginalEffect& d20,
                                  int n_sim, std::uint64_t seed) {
  if (d10_draws.empty()) throw ConfigError("combine_draws: no A vs. C draws");
  if (n_sim < 1) throw ConfigError("combine_draws: n_sim must be positive");
  if (!(d20.variance >= 0.0)) throw ConfigError("combine_draws: negative B vs. C variance");
  Engine eng = make_engine(derive_seed(seed, {key(Stage::kForwardMc)}));
  std::uniform_int_distribution<std::size_t> pick(0, d10_draws.size() - 1);
  std::normal_distribution<double> std_normal;
  const double sd = std::sqrt(d20.variance);
  std::vector<double> out(static_cast<std::size_t>(n_sim));
  for (auto& v : out) {
    const double a = d10_draws[pick(eng)];
    v = a - (d20.estimate + sd * std_normal(eng));
  }
  return out;
}

std::string to_json(const IndirectComparison& r) {
  nlohmann::json j = {{"estimate", r.estimate}, {"variance", r.variance}, {"lci", r.lci},
                      {"uci", r.uci},           {"method", r.method}};
  if (r.draws_path) j["draws_path"] = *r.draws_path;
  return j.dump(2);
}

}  // namespace popadj
