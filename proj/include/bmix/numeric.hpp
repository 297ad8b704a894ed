#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bmix {

using BigInt = mpz_class;
using Rational = mpq_class;

/// Exact parse of a decimal literal such as "0.1", "-3", "2.5e-3" or "7/9".
/// Throws ParseError on anything else.
Rational parse_rational(std::string_view text);

/// Canonical "num/den" (or "num" for integers).
std::string to_string(const Rational& q);
std::string to_string(const BigInt& z);

double to_double(const Rational& q);
double to_double(const BigInt& z);

BigInt from_u64(std::uint64_t v);
BigInt from_i64(std::int64_t v);

/// Value as int64 if it fits.
std::optional<std::int64_t> to_i64(const BigInt& z);
std::optional<std::uint64_t> to_u64(const BigInt& z);

BigInt pow(const BigInt& base, unsigned long exponent);
Rational pow(const Rational& base, unsigned long exponent);

/// Smallest integer >= q.
BigInt ceil(const Rational& q);
/// Largest integer <= q.
BigInt floor(const Rational& q);

/// Shortest round-trip decimal rendering of a double ('.' separator,
/// locale independent).
std::string format_double(double v);

}  // namespace bmix
