#pragma once

#include <cstdint>
#include <random>

namespace frm {

// Seeded random stream with platform-independent distributions.
//
// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so the conversions to uniform/normal/etc. live here.
// Every random draw in a scenario comes from one of these streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Box-Muller; consumes exactly two draws per call.
  double normal(double mean, double sd);

  double exponential(double mean);

  // Independent child stream derived from this stream's seed material.
  Rng fork(std::uint64_t stream_id);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to derive seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace frm
