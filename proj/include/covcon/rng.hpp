#pragma once

// Platform-independent random streams. Only the bit generators and the
// transforms below are used so that a seed reproduces the same doubles on
// every conforming host; <random> distributions are implementation-defined.

#include <cmath>
#include <cstdint>

namespace covcon {

/// One SplitMix64 step (Vigna's reference generator): advance by the golden
/// gamma, then apply the 64-bit finalizer.
constexpr std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for stream (cell_index, trial_index) under `master`. The mixed key
/// is fed through one SplitMix64 step, so derive_seed(0, 0, 0) is the first
/// output of the reference generator seeded with 0 (0xE220A8397B1DCDAF).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell_index,
                                    std::uint64_t trial_index) noexcept {
  std::uint64_t state = master ^ (cell_index * 0x9E3779B97F4A7C15ull) ^
                        (trial_index * 0xBF58476D1CE4E5B9ull);
  return splitmix64_next(state);
}

/// xoshiro256** 1.0, state filled from SplitMix64 as its authors recommend.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Xoshiro256(std::uint64_t seed) noexcept {
    for (auto& word : s_) word = splitmix64_next(seed);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
};

/// Variate transforms on top of Xoshiro256. Each instance owns its stream.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) noexcept : engine_(seed) {}

  std::uint64_t bits() noexcept { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double sign() noexcept { return (engine_() >> 63) ? -1.0 : 1.0; }

  /// Standard normal by the Marsaglia polar method (exact, no CLT).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  /// Standard exponential.
  double exponential() noexcept { return -std::log(uniform_open()); }

  /// log of a Gamma(shape, 1) variate (Marsaglia-Tsang, with the
  /// U^{1/a} boost for shape < 1). Returned on log scale so that tiny
  /// shapes do not underflow.
  double log_gamma_variate(double shape) noexcept {
    if (shape < 1.0) {
      const double boosted = log_gamma_variate(shape + 1.0);
      return boosted + std::log(uniform_open()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
    }
  }

 private:
  Xoshiro256 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace covcon
