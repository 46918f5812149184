#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace dtd {

/// The one generator used everywhere. std::mt19937_64's output sequence is
/// fixed by the standard; the distributions below are hand-rolled because the
/// std:: distributions are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Index drawn from an unnormalized-safe probability vector (sums to ~1).
  template <class Probs>
  std::size_t categorical(const Probs& probs) {
    const double u = uniform01();
    double acc = 0.0;
    const std::size_t n = static_cast<std::size_t>(probs.size());
    for (std::size_t i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // u landed in the rounding slack above the last partial sum
    for (std::size_t i = n; i-- > 0;) {
      if (probs[i] > 0.0) return i;
    }
    return n - 1;
  }

  // UniformRandomBitGenerator surface, for std::shuffle and friends.
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; decorrelates derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-stream seed for `stream` under `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(base ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace dtd
