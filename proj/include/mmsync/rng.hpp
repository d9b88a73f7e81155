#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "mmsync/types.hpp"

namespace mmsync {

// SplitMix64 finalizer, used to derive decorrelated stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named sub-stream. The result depends only on the arguments, so
// a Monte-Carlo trial gets the same draws regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags kept in one place so call sites cannot collide by accident.
enum class Stream : std::uint64_t {
  channel = 1,
  plan = 2,
  impairments = 3,
  noise = 4,
  precoder = 5,
  combiner = 6,
  pilots = 7,
  phase_noise = 8,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s), a, b});
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  cplx complex_normal(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mmsync
