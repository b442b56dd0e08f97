#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tddp {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used both for seed derivation and as the mixing
/// function of the counter-based uniforms below.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `stream` under master seed `seed`:
///   derive_seed(s, i) = splitmix64(splitmix64(s) ^ splitmix64(i + 1)).
/// Every replication, chain, or per-group sub-chain owns one such stream, so
/// results never depend on the number of worker threads.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 1));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng{derive_seed(seed, stream)};
}

/// Stateless uniform on the open interval (0, 1) keyed by (key, counter).
/// Lets data-parallel loops draw randomness without sharing an engine.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  const std::uint64_t bits = splitmix64(key ^ splitmix64(counter));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform01(Rng& rng) {
  // (0, 1): avoids log(0) in the inverse-CDF draws below.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline bool draw_bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Gamma with shape/rate parameterization.
inline double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

inline double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

/// Beta(1, alpha) by inversion: 1 - U^{1/alpha}.
inline double draw_beta_one(Rng& rng, double alpha) {
  return -std::expm1(std::log(uniform01(rng)) / alpha);
}

inline double draw_normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

inline std::uint64_t draw_poisson(Rng& rng, double rate) {
  if (rate <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(rate);
  return dist(rng);
}

}  // namespace tddp
