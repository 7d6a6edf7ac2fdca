#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace switchq {

/// Purposes for independent random streams within a trial.
enum class StreamPurpose : std::uint64_t {
  kGenerator = 1,
  kSampling = 2,
  kInitialQ = 3,
  kProbe = 4,
  kSwitching = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/**
 * Seeded 64-bit generator with portable uniform doubles.
 *
 * Streams are keyed by (base seed, trial, purpose) through splitmix64, so
 * each trial and each use within a trial draws from its own sequence.
 */
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t base, std::uint64_t trial, StreamPurpose purpose) {
    std::uint64_t key = splitmix64(base);
    key = splitmix64(key ^ trial);
    key = splitmix64(key ^ static_cast<std::uint64_t>(purpose));
    return Rng(key);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(uniform() * n); }

  /// Index drawn from a cumulative distribution whose last entry is ~1.
  int categorical(std::span<const double> cdf) {
    const double u = uniform();
    for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
      if (u < cdf[i]) return static_cast<int>(i);
    }
    return static_cast<int>(cdf.size()) - 1;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace switchq
