#pragma once

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

namespace polytask {

// All constraint arithmetic is exact. Fourier-Motzkin combinations multiply
// coefficients pairwise, so fixed-width integers overflow quickly; cpp_int
// never does.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt big_gcd(const BigInt& a, const BigInt& b) {
  return boost::multiprecision::gcd(a, b);
}

inline BigInt big_lcm(const BigInt& a, const BigInt& b) {
  return boost::multiprecision::lcm(a, b);
}

// Floor division rounding toward negative infinity for any sign of `a`.
inline BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

inline BigInt ceil_div(const BigInt& a, const BigInt& b) {
  return -floor_div(-a, b);
}

inline std::int64_t floor_div_i64(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

inline BigInt numerator(const Rational& r) { return boost::multiprecision::numerator(r); }
inline BigInt denominator(const Rational& r) { return boost::multiprecision::denominator(r); }

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

}  // namespace polytask
