#include "qsynth/rational.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace qsynth {

namespace {

constexpr long long kMax = std::numeric_limits<long long>::max();
constexpr long long kMin = std::numeric_limits<long long>::min();

bool fits_ll(__int128 v) { return v >= static_cast<__int128>(kMin) && v <= static_cast<__int128>(kMax); }

__int128 gcd128(__int128 a, __int128 b) {
  unsigned __int128 ua = a < 0 ? -static_cast<unsigned __int128>(a) : a;
  unsigned __int128 ub = b < 0 ? -static_cast<unsigned __int128>(b) : b;
  // drop to hardware-width euclid as soon as both operands fit
  while (ua >> 64 || ub >> 64) {
    if (ub == 0) return ua;
    unsigned __int128 t = ua % ub;
    ua = ub;
    ub = t;
  }
  return std::gcd(static_cast<unsigned long long>(ua), static_cast<unsigned long long>(ub));
}

mpz_class mpz_from_i128(__int128 v) {
  bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  mpz_class hi(static_cast<unsigned long>(u >> 64));
  mpz_class lo(static_cast<unsigned long>(u & 0xffffffffffffffffULL));
  mpz_class r = (hi << 64) + lo;
  return neg ? mpz_class(-r) : r;
}

}  // namespace

Rational::Rational(long long n, long long d) {
  if (d == 0) throw std::invalid_argument("rational: zero denominator");
  __int128 nn = n, dd = d;
  if (dd < 0) { nn = -nn; dd = -dd; }
  __int128 g = gcd128(nn, dd);
  if (g > 1) { nn /= g; dd /= g; }
  if (nn == 0) dd = 1;
  num_ = static_cast<long long>(nn);
  den_ = static_cast<long long>(dd);
}

Rational::Rational(const mpq_class& q) : num_(0), den_(1), big_(std::make_unique<mpq_class>(q)) {
  big_->canonicalize();
  demote();
}

Rational::Rational(const Rational& o) : num_(o.num_), den_(o.den_) {
  if (o.big_) big_ = std::make_unique<mpq_class>(*o.big_);
}

Rational& Rational::operator=(const Rational& o) {
  if (this == &o) return *this;
  num_ = o.num_;
  den_ = o.den_;
  big_ = o.big_ ? std::make_unique<mpq_class>(*o.big_) : nullptr;
  return *this;
}

Rational Rational::make(__int128 n, __int128 d) {
  if (d == 0) throw std::invalid_argument("rational: zero denominator");
  if (d < 0) { n = -n; d = -d; }
  __int128 g = gcd128(n, d);
  if (g > 1) { n /= g; d /= g; }
  if (n == 0) d = 1;
  if (fits_ll(n) && fits_ll(d)) {
    return Rational(FromRaw{}, static_cast<long long>(n), static_cast<long long>(d));
  }
  Rational r;
  r.big_ = std::make_unique<mpq_class>();
  mpq_class& q = *r.big_;
  q = mpq_class(mpz_from_i128(n)) / mpq_class(mpz_from_i128(d));
  q.canonicalize();
  return r;
}

void Rational::promote() {
  if (big_) return;
  big_ = std::make_unique<mpq_class>(static_cast<long>(num_), 1);
  // long long may exceed long on some ABIs; build via mpz to stay exact
  mpz_class n = mpz_from_i128(num_);
  mpz_class d = mpz_from_i128(den_);
  *big_ = mpq_class(n) / mpq_class(d);
  big_->canonicalize();
}

void Rational::demote() {
  if (!big_) return;
  const mpz_class& n = big_->get_num();
  const mpz_class& d = big_->get_den();
  if (n.fits_slong_p() && d.fits_slong_p()) {
    num_ = n.get_si();
    den_ = d.get_si();
    big_.reset();
  }
}

Rational Rational::from_string(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("rational: empty string");
  auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    std::string ns(s.substr(0, slash)), ds(s.substr(slash + 1));
    mpz_class n, d;
    if (n.set_str(ns, 10) != 0 || d.set_str(ds, 10) != 0) {
      throw std::invalid_argument("rational: bad literal '" + std::string(s) + "'");
    }
    if (d == 0) throw std::invalid_argument("rational: zero denominator");
    return Rational(mpq_class(n) / mpq_class(d));
  }
  auto dot = s.find('.');
  if (dot != std::string_view::npos) {
    std::string ip(s.substr(0, dot)), fp(s.substr(dot + 1));
    if (fp.empty() || fp.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("rational: bad literal '" + std::string(s) + "'");
    }
    bool neg = !ip.empty() && ip[0] == '-';
    if (!ip.empty() && (ip[0] == '+' || ip[0] == '-')) ip = ip.substr(1);
    if (ip.empty()) ip = "0";
    mpz_class whole, frac, scale = 1;
    if (whole.set_str(ip, 10) != 0 || frac.set_str(fp, 10) != 0) {
      throw std::invalid_argument("rational: bad literal '" + std::string(s) + "'");
    }
    for (size_t i = 0; i < fp.size(); ++i) scale *= 10;
    mpq_class q = mpq_class(whole) + mpq_class(frac) / mpq_class(scale);
    if (neg) q = -q;
    return Rational(q);
  }
  mpz_class n;
  if (n.set_str(std::string(s), 10) != 0) {
    throw std::invalid_argument("rational: bad literal '" + std::string(s) + "'");
  }
  return Rational(mpq_class(n));
}

Rational Rational::from_double(double d) {
  if (!std::isfinite(d)) throw std::invalid_argument("rational: non-finite double");
  mpq_class q(d);
  return Rational(q);
}

Rational Rational::from_double_fixed(double d, int digits) {
  if (!std::isfinite(d)) throw std::invalid_argument("rational: non-finite double");
  if (digits < 0 || digits > 18) throw std::invalid_argument("rational: digits out of range");
  long long scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  double scaled = d * static_cast<double>(scale);
  if (std::abs(scaled) > 9.0e18) throw std::invalid_argument("rational: fixed conversion overflow");
  return Rational(static_cast<long long>(std::llround(scaled)), scale);
}

Rational Rational::from_double_ceil(double d, int digits) {
  Rational r = from_double_fixed(d, digits);
  if (r < from_double(d)) r += Rational(1, [&] {
    long long s = 1;
    for (int i = 0; i < digits; ++i) s *= 10;
    return s;
  }());
  return r;
}

Rational Rational::from_double_floor(double d, int digits) {
  return -from_double_ceil(-d, digits);
}

bool Rational::is_integer() const noexcept {
  return is_small() ? den_ == 1 : big_->get_den() == 1;
}

int Rational::sign() const noexcept {
  if (is_small()) return num_ > 0 ? 1 : (num_ < 0 ? -1 : 0);
  return sgn(*big_);
}

long long Rational::num_small() const {
  if (!is_small()) throw std::overflow_error("rational: numerator too large");
  return num_;
}

long long Rational::den_small() const {
  if (!is_small()) throw std::overflow_error("rational: denominator too large");
  return den_;
}

long long Rational::to_long() const {
  if (!is_integer()) throw std::domain_error("rational: not an integer");
  if (is_small()) return num_;
  if (!big_->get_num().fits_slong_p()) throw std::overflow_error("rational: integer too large");
  return big_->get_num().get_si();
}

double Rational::to_double() const noexcept {
  if (is_small()) return static_cast<double>(num_) / static_cast<double>(den_);
  return big_->get_d();
}

std::string Rational::to_string() const {
  if (is_small()) {
    std::string s = std::to_string(num_);
    if (den_ != 1) s += "/" + std::to_string(den_);
    return s;
  }
  return big_->get_str();
}

mpq_class Rational::to_mpq() const {
  if (big_) return *big_;
  return mpq_class(mpz_from_i128(num_)) / mpq_class(mpz_from_i128(den_));
}

Rational Rational::operator-() const {
  if (is_small()) {
    if (num_ == kMin) return Rational(mpq_class(-to_mpq()));
    return Rational(FromRaw{}, -num_, den_);
  }
  return Rational(mpq_class(-*big_));
}

Rational& Rational::operator+=(const Rational& o) {
  if (is_small() && o.is_small()) {
    __int128 n = static_cast<__int128>(num_) * o.den_ + static_cast<__int128>(o.num_) * den_;
    __int128 d = static_cast<__int128>(den_) * o.den_;
    *this = make(n, d);
    return *this;
  }
  promote();
  *big_ += o.to_mpq();
  demote();
  return *this;
}

Rational& Rational::operator-=(const Rational& o) {
  if (is_small() && o.is_small()) {
    __int128 n = static_cast<__int128>(num_) * o.den_ - static_cast<__int128>(o.num_) * den_;
    __int128 d = static_cast<__int128>(den_) * o.den_;
    *this = make(n, d);
    return *this;
  }
  promote();
  *big_ -= o.to_mpq();
  demote();
  return *this;
}

Rational& Rational::operator*=(const Rational& o) {
  if (is_small() && o.is_small()) {
    __int128 n = static_cast<__int128>(num_) * o.num_;
    __int128 d = static_cast<__int128>(den_) * o.den_;
    *this = make(n, d);
    return *this;
  }
  promote();
  *big_ *= o.to_mpq();
  demote();
  return *this;
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.is_zero()) throw std::domain_error("rational: division by zero");
  if (is_small() && o.is_small()) {
    __int128 n = static_cast<__int128>(num_) * o.den_;
    __int128 d = static_cast<__int128>(den_) * o.num_;
    *this = make(n, d);
    return *this;
  }
  promote();
  *big_ /= o.to_mpq();
  demote();
  return *this;
}

int Rational::cmp(const Rational& o) const noexcept {
  if (is_small() && o.is_small()) {
    __int128 l = static_cast<__int128>(num_) * o.den_;
    __int128 r = static_cast<__int128>(o.num_) * den_;
    return l < r ? -1 : (l > r ? 1 : 0);
  }
  return ::cmp(to_mpq(), o.to_mpq());
}

Rational Rational::abs() const {
  return sign() < 0 ? -*this : *this;
}

Rational Rational::floor() const {
  if (is_small()) {
    long long q = num_ / den_;
    if (num_ % den_ != 0 && num_ < 0) --q;
    return Rational(q);
  }
  mpz_class f;
  mpz_fdiv_q(f.get_mpz_t(), big_->get_num().get_mpz_t(), big_->get_den().get_mpz_t());
  return Rational(mpq_class(f));
}

Rational Rational::ceil() const {
  return -((-*this).floor());
}

std::ostream& operator<<(std::ostream& os, const Rational& r) {
  return os << r.to_string();
}

}  // namespace qsynth
