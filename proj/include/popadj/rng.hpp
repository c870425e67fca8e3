#pragma once

// Reproducible random streams. Every stochastic operation takes an explicit
// 64-bit seed; sub-streams are derived by hashing (seed, key...) so that the
// values drawn by a replicate, resample or chain never depend on scheduling.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>

namespace popadj {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a list of integer keys.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(seed);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Engine seeded from a 64-bit seed via seed_seq (full state initialisation).
Engine make_engine(std::uint64_t seed);

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) noexcept {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Stream keys used across the library so that stages never share streams.
enum class Stage : std::uint64_t {
  kAcTrial = 1,
  kBcTrial = 2,
  kPseudo = 3,
  kBootstrap = 4,
  kMcmc = 5,
  kPredictive = 6,
  kParamSim = 7,
  kForwardMc = 8,
};

constexpr std::uint64_t key(Stage s) noexcept { return static_cast<std::uint64_t>(s); }

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items are
/// claimed dynamically, so fn must write only to slot i of its outputs.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace popadj
