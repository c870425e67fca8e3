#include "doctest.h"

#include "popadj/itc.hpp"
#include "popadj/rng.hpp"
#include "popadj/stats.hpp"

#include "json.hpp"

#include <random>

using namespace popadj;
using doctest::Approx;

namespace {

MarginalEffect effect(double est, double var) {
  MarginalEffect e;
  e.estimate = est;
  e.variance = var;
  return e;
}

}  // namespace

TEST_CASE("Bucher combination") {
  const IndirectComparison r = bucher(effect(-0.5, 0.04), effect(-0.3, 0.02));
  CHECK(r.estimate == Approx(-0.2));
  CHECK(r.variance == Approx(0.06));
  CHECK(r.lci == Approx(-0.680091167635531).epsilon(1e-9));
  CHECK(r.uci == Approx(0.28009116763553094).epsilon(1e-9));

  CHECK(bucher(effect(0.7, 0.1), effect(0.7, 0.2)).estimate == 0.0);

  const IndirectComparison c = bucher(effect(-0.8109302162163288, 0.10), effect(-0.8109302162163288, 0.17361111111111113));
  CHECK(c.estimate == Approx(0.0));
  CHECK(c.variance == Approx(0.27361111111111114));

  const IndirectComparison s = bucher(effect(-0.3, 0.02), effect(-0.5, 0.04));
  CHECK(s.estimate == Approx(-r.estimate));
  CHECK(s.variance == Approx(r.variance));

  const IndirectComparison n90 = bucher(effect(0.0, 1.0), effect(0.0, 0.0), 0.10);
  CHECK(n90.uci == Approx(1.6448536269514722).epsilon(1e-9));
}

TEST_CASE("forward Monte Carlo combination") {
  const std::vector<double> fixed(10, -0.5);
  for (double v : combine_draws(fixed, effect(-0.3, 0.0), 100, 1)) CHECK(v == Approx(-0.2));

  Engine eng = make_engine(2);
  std::normal_distribution<double> nd(-0.5, 0.2);
  std::vector<double> d10(100000);
  for (auto& v : d10) v = nd(eng);
  const auto out = combine_draws(d10, effect(-0.3, 0.02), 100000, 3);
  CHECK(std::abs(mean(out) + 0.2) < 0.01);
  CHECK(std::abs(sample_variance(out) - 0.06) < 0.005);
  CHECK(combine_draws(d10, effect(-0.3, 0.02), 100, 4) == combine_draws(d10, effect(-0.3, 0.02), 100, 4));
}

TEST_CASE("JSON serialization") {
  IndirectComparison r = bucher(effect(-0.5, 0.04), effect(-0.3, 0.02));
  r.method = "maic";
  auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["estimate"].get<double>() == Approx(-0.2));
  CHECK(j["method"] == "maic");
  CHECK(!j.contains("draws_path"));
  r.draws_path = "draws.csv";
  j = nlohmann::json::parse(to_json(r));
  CHECK(j["draws_path"] == "draws.csv");
  for (const char* k : {"variance", "lci", "uci"}) CHECK(j.contains(k));
}
