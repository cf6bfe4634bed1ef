#pragma once

#include <cstdint>
#include <random>

#include "modgrad/rational.hpp"

namespace modgrad {

// Deterministic RNG with hand-rolled distributions so that a seed produces
// the same stream on every platform (std distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  double uniform01() {
    // 53 random bits into [0, 1).
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) return 0;
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Small random rational with denominator in [1, max_den]; keeps exact-mode
  // fixtures inside Q.
  Rational rational(long max_num = 20, long max_den = 7) {
    const long num = static_cast<long>(index(static_cast<std::size_t>(2 * max_num + 1))) - max_num;
    const long den = 1 + static_cast<long>(index(static_cast<std::size_t>(max_den)));
    return Rational(num, den);
  }

  Rational rational_nonzero(long max_num = 20, long max_den = 7) {
    for (;;) {
      Rational r = rational(max_num, max_den);
      if (r != 0) return r;
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace modgrad
