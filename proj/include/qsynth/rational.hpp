/*
 * rational.hpp
 *
 * Exact arbitrary-precision rational scalar. Values that fit in 64-bit
 * numerator/denominator are kept inline; anything larger is promoted to a
 * heap-allocated GMP rational and demoted back when it fits again. All
 * synthesis arithmetic runs on this type, so the inline path is the one
 * that has to be fast.
 */

#ifndef QSYNTH_RATIONAL_HPP
#define QSYNTH_RATIONAL_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

#include <gmpxx.h>

namespace qsynth {

class Rational {
 public:
  Rational() noexcept : num_(0), den_(1) {}
  Rational(long long n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(long n) : num_(n), den_(1) {}       // NOLINT
  Rational(int n) : num_(n), den_(1) {}        // NOLINT
  Rational(long long n, long long d);
  Rational(const mpq_class& q);  // NOLINT

  Rational(const Rational& o);
  Rational(Rational&& o) noexcept = default;
  Rational& operator=(const Rational& o);
  Rational& operator=(Rational&& o) noexcept = default;
  ~Rational() = default;

  // Parses "7", "-3/4", "2.5", "-0.125". No exponents, no whitespace.
  static Rational from_string(std::string_view s);
  // Exact value of the IEEE double (must be finite).
  static Rational from_double(double d);
  // Nearest multiple of 10^-digits; used to pin floating constructions.
  static Rational from_double_fixed(double d, int digits);
  // directional variants: the least/greatest multiple of 10^-digits
  // bounding d from above/below
  static Rational from_double_ceil(double d, int digits);
  static Rational from_double_floor(double d, int digits);

  bool is_small() const noexcept { return big_ == nullptr; }
  bool is_zero() const noexcept { return is_small() ? num_ == 0 : sgn(*big_) == 0; }
  bool is_one() const noexcept { return is_small() ? (num_ == 1 && den_ == 1) : *big_ == 1; }
  bool is_integer() const noexcept;
  int sign() const noexcept;

  // Only valid for values that fit; callers use these after is_integer()
  // bound checks (quantization levels are always small).
  long long num_small() const;
  long long den_small() const;
  long long to_long() const;  // requires integer value fitting in long long

  double to_double() const noexcept;
  std::string to_string() const;
  mpq_class to_mpq() const;

  Rational operator-() const;
  Rational& operator+=(const Rational& o);
  Rational& operator-=(const Rational& o);
  Rational& operator*=(const Rational& o);
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  // three-way compare, exact
  int cmp(const Rational& o) const noexcept;
  friend bool operator==(const Rational& a, const Rational& b) { return a.cmp(b) == 0; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.cmp(b) != 0; }
  friend bool operator<(const Rational& a, const Rational& b) { return a.cmp(b) < 0; }
  friend bool operator<=(const Rational& a, const Rational& b) { return a.cmp(b) <= 0; }
  friend bool operator>(const Rational& a, const Rational& b) { return a.cmp(b) > 0; }
  friend bool operator>=(const Rational& a, const Rational& b) { return a.cmp(b) >= 0; }

  Rational abs() const;
  Rational floor() const;  // greatest integer <= value
  Rational ceil() const;

 private:
  struct FromRaw {};
  Rational(FromRaw, long long n, long long d) noexcept : num_(n), den_(d) {}
  static Rational make(__int128 n, __int128 d);
  void promote();   // move inline value into big_
  void demote();    // shrink big_ back to inline if it fits

  long long num_, den_;            // canonical (gcd 1, den > 0) when inline
  std::unique_ptr<mpq_class> big_; // non-null => value lives here
};

std::ostream& operator<<(std::ostream& os, const Rational& r);

inline const Rational& min(const Rational& a, const Rational& b) { return b < a ? b : a; }
inline const Rational& max(const Rational& a, const Rational& b) { return a < b ? b : a; }

}  // namespace qsynth

#endif  // QSYNTH_RATIONAL_HPP
