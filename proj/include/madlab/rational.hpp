#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace madlab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses "12", "-3", "0.0004", "2.22e-6", "3/10" exactly.
// Throws std::invalid_argument on malformed input.
Rational parse_rational(std::string_view text);

// "98", "3/10", "-7/2".
std::string to_string(const Rational& r);

// Fixed-point decimal rendering, rounded half away from zero.
std::string to_decimal(const Rational& r, int digits);

double to_double(const Rational& r);

inline Rational rat(std::int64_t n, std::int64_t d = 1) { return Rational(n) / d; }

}  // namespace madlab
