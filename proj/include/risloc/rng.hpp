#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace risloc {

// Stream roles. Every consumer of randomness gets its own stream keyed by
// (seed, sample index, role), so draws never depend on batch layout or
// thread schedule.
enum class StreamRole : std::uint64_t {
  kUePosition = 1,
  kChannelHr = 2,
  kChannelGr = 3,
  kChannelHd = 4,
  kNoise = 5,
  kWarmupTheta = 6,
  kWeightInit = 7,
  kThetaDesign = 8,
  kGraphGen = 9,
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: output i is a hash of (key, i). Cheap to fork,
// deterministic under any evaluation order.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
      std::uint64_t c = 0) {
    key_ = detail::splitmix64(seed);
    key_ = detail::splitmix64(key_ ^ detail::splitmix64(a + 0x100000001b3ull));
    key_ = detail::splitmix64(key_ ^ detail::splitmix64(b + 0xcbf29ce484222325ull));
    key_ = detail::splitmix64(key_ ^ detail::splitmix64(c + 0x9ddfea08eb382d69ull));
  }

  Rng(std::uint64_t seed, std::uint64_t sample, StreamRole role)
      : Rng(seed, sample, static_cast<std::uint64_t>(role)) {}

  std::uint64_t next_u64() { return detail::splitmix64(key_ + counter_++); }

  // Uniform on (0, 1]; never returns 0 so log() is safe.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Circular complex normal CN(0, 1): real/imag parts ~ N(0, 1/2).
  std::complex<double> cnormal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace risloc
