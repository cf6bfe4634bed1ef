#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace modgrad {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double x) { return x; }

// Doubles are dyadic rationals; this embedding is exact.
inline Rational rat_of(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("rat_of: non-finite value");
  return Rational(x);
}

inline Rational rat_abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

inline Rational rat_pow(const Rational& base, long e) {
  if (e == 0) return Rational(1);
  if (base == 0) {
    if (e < 0) throw std::domain_error("rat_pow: 0 to negative power");
    return Rational(0);
  }
  Rational acc(1);
  Rational b = base;
  unsigned long n = e < 0 ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
  while (n) {
    if (n & 1) acc *= b;
    b *= b;
    n >>= 1;
  }
  return e < 0 ? Rational(1) / acc : acc;
}

// Writes x as a reduced fraction u/v with v > 0, or throws if x is not
// representable at the given denominator bound.
struct Fraction {
  long num = 0;
  long den = 1;
};

// Best rational approximation of x with denominator <= max_den (Stern-Brocot
// walk), used to snap converged float densities onto exact candidates.
inline Rational snap_to_rational(double x, long max_den = 1000000, double tol = 1e-7) {
  if (!std::isfinite(x)) throw std::invalid_argument("snap_to_rational: non-finite value");
  const bool neg = x < 0;
  double y = std::abs(x);
  long long a_num = 0, a_den = 1;  // lower bound 0/1
  long long b_num = 1, b_den = 0;  // upper bound 1/0
  long long best_num = std::llround(y), best_den = 1;
  double best_err = std::abs(y - static_cast<double>(best_num));
  while (a_den + b_den <= max_den) {
    const long long m_num = a_num + b_num;
    const long long m_den = a_den + b_den;
    const double m = static_cast<double>(m_num) / static_cast<double>(m_den);
    const double err = std::abs(y - m);
    if (err < best_err) {
      best_err = err;
      best_num = m_num;
      best_den = m_den;
    }
    if (err == 0) break;
    if (m < y) {
      a_num = m_num;
      a_den = m_den;
    } else {
      b_num = m_num;
      b_den = m_den;
    }
  }
  Rational r(best_num, best_den);
  if (neg) r = -r;
  const double back = to_double(r);
  const double scale = std::max(1.0, std::abs(x));
  if (std::abs(back - x) > tol * scale) return rat_of(x);  // keep the exact dyadic instead
  return r;
}

// Decides c1 * r1^t == c2 * r2^t for positive rationals and rational exponent
// t = u/v by clearing the root: equivalent to (c1/c2)^v == (r2/r1)^u.
inline bool rational_power_equal(const Rational& c1, const Rational& r1, const Rational& c2,
                                 const Rational& r2, long u, long v) {
  if (c1 <= 0 || c2 <= 0 || r1 <= 0 || r2 <= 0) throw std::domain_error("rational_power_equal: positive inputs required");
  if (v <= 0) throw std::domain_error("rational_power_equal: exponent denominator must be positive");
  return rat_pow(c1 / c2, v) == rat_pow(r2 / r1, u);
}

// Exponent p as an exact fraction when p is "nice" (denominator <= 64), used
// by the symbolic stationarity check in exact mode.
inline bool exponent_as_fraction(double p, long& u, long& v) {
  for (long den = 1; den <= 64; ++den) {
    const double scaled = p * static_cast<double>(den);
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) < 1e-12 && std::abs(rounded) < 1e15) {
      long g_num = static_cast<long>(rounded);
      long g = std::abs(std::gcd(g_num, den));
      u = g_num / g;
      v = den / g;
      return true;
    }
  }
  return false;
}

template <class R>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double from_double(double x) { return x; }
  static double abs(double x) { return std::abs(x); }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static Rational from_double(double x) { return rat_of(x); }
  static Rational abs(const Rational& x) { return rat_abs(x); }
};

}  // namespace modgrad
