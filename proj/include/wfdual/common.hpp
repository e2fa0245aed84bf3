// Core scalar types and error taxonomy shared by every module.
//
// Two arithmetic modes run through the whole library:
//   * exact rationals (boost cpp_rational) for the algebraic identities,
//   * binary floats with a compile-time significand width (cpp_bin_float)
//     for everything irrational or too large to keep exact.
// All numeric code is templated on the scalar type S; scalar_traits<S>
// carries the few operations that differ between the modes.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace wfdual {

inline constexpr const char* kVersion = "0.1.0";

using BigInt   = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

template <unsigned Bits>
using BinFloat = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<Bits, boost::multiprecision::digit_base_2>,
    boost::multiprecision::et_off>;

using Float128  = BinFloat<128>;   // default high-precision mode
using Float256  = BinFloat<256>;
using Float512  = BinFloat<512>;
using Float1024 = BinFloat<1024>;
using Float2048 = BinFloat<2048>;

enum class Mode { RationalExact, HighPrecisionFloat };

// ── errors ──────────────────────────────────────────────────────────────────

/// Bad parameters, bad JSON, out-of-domain values: anything wrong with an
/// object before numerics even start.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Complete-monotonicity violation detected while building a dual matrix or
/// running the grid check. Carries the offending entry.
class CmViolation : public std::runtime_error {
 public:
  CmViolation(int row, int col, std::string value, const std::string& what)
      : std::runtime_error(what), row_(row), col_(col), value_(std::move(value)) {}
  int row() const { return row_; }
  int col() const { return col_; }
  const std::string& value() const { return value_; }

 private:
  int row_, col_;
  std::string value_;
};

/// Numerical breakdown: singular solve, non-convergence, defective spectrum.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// ── scalar traits ───────────────────────────────────────────────────────────

template <class S>
struct scalar_traits {
  static constexpr bool is_exact = false;

  static S from_rational(const Rational& q) {
    return S(numerator(q)) / S(denominator(q));
  }
  static S from_bigint(const BigInt& v) { return S(v); }
  static S abs(const S& x) { return x < 0 ? S(-x) : x; }
  static double to_double(const S& x) { return x.template convert_to<double>(); }

  /// Round-trip decimal rendering (CSV / JSON float format).
  static std::string to_string(const S& x) {
    std::ostringstream os;
    os.precision(std::numeric_limits<S>::max_digits10);
    os << x;
    return os.str();
  }

  /// Machine epsilon of the mode; rationals report 0.
  static S epsilon() { return std::numeric_limits<S>::epsilon(); }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool is_exact = true;

  static Rational from_rational(const Rational& q) { return q; }
  static Rational from_bigint(const BigInt& v) { return Rational(v); }
  static Rational abs(const Rational& x) { return x < 0 ? Rational(-x) : x; }
  static double to_double(const Rational& x) { return x.convert_to<double>(); }

  /// Canonical exact rendering: "p" for integers, "p/q" otherwise.
  static std::string to_string(const Rational& x) {
    std::ostringstream os;
    if (denominator(x) == 1)
      os << numerator(x);
    else
      os << numerator(x) << '/' << denominator(x);
    return os.str();
  }

  static Rational epsilon() { return Rational(0); }
};

template <>
struct scalar_traits<double> {
  static constexpr bool is_exact = false;
  static double from_rational(const Rational& q) { return q.convert_to<double>(); }
  static double from_bigint(const BigInt& v) { return v.convert_to<double>(); }
  static double abs(double x) { return x < 0 ? -x : x; }
  static double to_double(double x) { return x; }
  static std::string to_string(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  }
  static double epsilon() { return std::numeric_limits<double>::epsilon(); }
};

template <class S>
S from_rational(const Rational& q) {
  return scalar_traits<S>::from_rational(q);
}

template <class S>
S abs_value(const S& x) {
  return scalar_traits<S>::abs(x);
}

/// Parse "p/q", integer, or decimal strings ("0.37", "-3", "2.5e-3") into an
/// exact rational. Decimal inputs are exact: 0.37 -> 37/100.
Rational parse_rational(const std::string& text);

inline Rational parse_rational(const std::string& text) {
  std::string s = text;
  // strip whitespace
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) throw ConfigError("empty scalar literal");
  s = s.substr(a, b - a + 1);

  if (auto slash = s.find('/'); slash != std::string::npos) {
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    try {
      BigInt p(num), q(den);
      if (q == 0) throw ConfigError("zero denominator in '" + text + "'");
      return Rational(p, q);
    } catch (const std::exception&) {
      throw ConfigError("bad rational literal '" + text + "'");
    }
  }

  // decimal with optional exponent
  bool neg = false;
  size_t pos = 0;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) neg = (s[pos++] == '-');
  std::string digits;
  long frac_digits = 0;
  bool seen_dot = false, seen_digit = false;
  long exp10 = 0;
  for (; pos < s.size(); ++pos) {
    char c = s[pos];
    if (c >= '0' && c <= '9') {
      digits += c;
      seen_digit = true;
      if (seen_dot) ++frac_digits;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else if ((c == 'e' || c == 'E') && seen_digit) {
      try {
        exp10 = std::stol(s.substr(pos + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad exponent in '" + text + "'");
      }
      break;
    } else {
      throw ConfigError("bad scalar literal '" + text + "'");
    }
  }
  if (!seen_digit) throw ConfigError("bad scalar literal '" + text + "'");

  BigInt mant(digits.empty() ? "0" : digits);
  if (neg) mant = -mant;
  long net = exp10 - frac_digits;
  Rational r(mant);
  BigInt ten(10);
  if (net > 0)
    r *= Rational(boost::multiprecision::pow(ten, static_cast<unsigned>(net)));
  else if (net < 0)
    r /= Rational(boost::multiprecision::pow(ten, static_cast<unsigned>(-net)));
  return r;
}

/// Exact rendering used by the JSON grammar (same as the CSV rational form).
inline std::string format_rational(const Rational& q) {
  return scalar_traits<Rational>::to_string(q);
}

}  // namespace wfdual
