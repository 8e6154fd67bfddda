// Seed derivation and portable draws. Distribution sampling is implemented
// by hand because std::normal_distribution and friends are allowed to differ
// across standard libraries, and golden files pin exact streams.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace syntax {

// splitmix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a substream seed from a master seed plus up to three labels.
// Labels are mixed sequentially so (tag, a, b) tuples never collide with
// permutations of each other.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(master ^ 0x6a09e667f3bcc908ULL);
  s = mix64(s ^ tag);
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  return s;
}

// Stream labels. Trial streams are keyed by (environment, run) only, so the
// same decision randomness is replayed for every policy and every lambda.
inline constexpr std::uint64_t kTagEnvironment = 0x454e56ULL;
inline constexpr std::uint64_t kTagTrial = 0x545249ULL;

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via the Marsaglia polar method. The spare variate is
  // discarded so each call consumes a self-contained chunk of the stream.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

  // Uniform on {0, ..., n-1} without modulo bias.
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x < limit) return static_cast<int>(x % un);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace syntax
