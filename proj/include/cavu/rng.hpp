#pragma once

#include <cmath>
#include <cstdint>

namespace cavu {

// Counter-based pseudo-random generator: a SplitMix64 finalizer applied to a
// keyed, striding counter. The n-th draw of stream `stream` under `seed` is a
// pure function of (seed, stream, n), so every simulated path owns an
// independent stream that can be replayed in isolation and in parallel.
// The algorithm is part of the output contract and must not change between
// releases; golden tests assert statistics, never raw draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ (0x9E3779B97F4A7C15ULL +
                           stream * 0xD2B74407B1CE6E93ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0,1) with 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.28318530717958647692 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  // Exponential with the given rate (> 0).
  double next_exponential(double rate) {
    return -std::log1p(-next_uniform()) / rate;
  }

  // Index into a discrete distribution given by `weights` (not necessarily
  // normalized); returns the last index with positive weight on roundoff.
  template <typename Vec>
  int next_index(const Vec& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_uniform() * total;
    int last_positive = 0;
    for (std::size_t idx = 0; idx < weights.size(); ++idx) {
      if (weights[idx] > 0.0) last_positive = static_cast<int>(idx);
      u -= weights[idx];
      if (u < 0.0 && weights[idx] > 0.0) return static_cast<int>(idx);
    }
    return last_positive;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cavu
