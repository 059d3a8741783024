#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace scanident {

// SplitMix64 finalizer. Used to spread (seed, stream ids) into well-separated
// engine seeds so parallel and serial replicate runs agree bit-for-bit.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-style stream derivation: the same (seed, a, b, c) always names the
// same stream, independent of which thread consumes it.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

// Standard normal stream: mt19937_64 (fully specified by the standard) plus
// an explicit Box-Muller transform. std::normal_distribution is
// implementation-defined, which would break cross-platform reproducibility.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t stream_seed) : eng_(stream_seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] so log(u1) is finite; u2 in [0,1).
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform draw in [0, m). Modulo bias is ~m / 2^64, irrelevant at the
  // domain sizes handled here.
  std::uint64_t uniform_below(std::uint64_t m) { return eng_() % m; }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace scanident
