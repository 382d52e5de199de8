#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedleak {

using Rng = std::mt19937_64;

// Stream tags keep independent random streams (init, shuffle, noise, ...)
// from colliding when they are derived from the same master seed.
enum Stream : uint64_t {
  kStreamInit = 0x1a2b3c4d01ull,
  kStreamShuffle = 0x1a2b3c4d02ull,
  kStreamNoise = 0x1a2b3c4d03ull,
  kStreamSelect = 0x1a2b3c4d04ull,
  kStreamPartition = 0x1a2b3c4d05ull,
  kStreamDirichlet = 0x1a2b3c4d06ull,
  kStreamClient = 0x1a2b3c4d07ull,
  kStreamDummy = 0x1a2b3c4d08ull,
  kStreamPredictor = 0x1a2b3c4d09ull,
  kStreamSynth = 0x1a2b3c4d0aull,
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic seed derivation: independent of evaluation order, so
// per-client / per-round streams can be computed in any order.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t a = 0,
                         uint64_t b = 0) {
  uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

inline Rng make_rng(uint64_t seed) { return Rng(seed); }

// Per-client stream used by the orchestrator; exposed so tests can
// reproduce a client's exact batch order.
inline uint64_t client_stream_seed(uint64_t fed_seed, uint64_t round,
                                   uint64_t client_id) {
  return mix_seed(fed_seed, kStreamClient, round, client_id);
}

inline double sample_gaussian(Rng& rng, double sigma) {
  std::normal_distribution<double> d(0.0, sigma);
  return d(rng);
}

// Laplace(0, b) via inverse CDF; std:: has no Laplace distribution.
inline double sample_laplace(Rng& rng, double b) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double v = u(rng);
  double s = v < 0.0 ? -1.0 : 1.0;
  return -b * s * std::log(1.0 - 2.0 * std::abs(v));
}

}  // namespace fedleak
