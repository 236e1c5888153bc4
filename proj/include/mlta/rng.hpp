#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mlta {

// splitmix64 finalizer, used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4a9c176c2bb61ULL ^ 0x2545f4914f6cdd1dULL;
  return x ^ (x >> 31);
}

// Deterministic random stream (layout version 1).
//
// The engine is mt19937_64, whose output sequence is fixed by the C++
// standard, and the uniform/normal transforms below are spelled out rather
// than delegated to std::*_distribution (which is implementation defined).
// A (seed, stream) pair therefore produces the same draws on every platform.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream)
      : engine_(mix64(mix64(seed) ^ mix64(~stream))) {}

  // uniform on (0, 1]
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; draws two uniforms per pair
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() <= p; }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mlta
