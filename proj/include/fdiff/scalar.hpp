#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fdiff {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DivisionByZero : public Error {
public:
  DivisionByZero() : Error("division by zero") {}
};

using Rational = mpq_class;

inline Rational parse_rational(std::string_view text)
{
  std::string s(text);
  if (s.empty())
    throw Error("empty rational literal");
  Rational q;
  if (q.set_str(s, 10) != 0)
    throw Error("malformed rational literal '" + s + "'");
  if (q.get_den() == 0)
    throw DivisionByZero();
  q.canonicalize();
  return q;
}

inline std::string to_string(const Rational& q)
{
  return q.get_str();
}

// Exact Gaussian rational re + im*i. Both parts are kept in lowest terms.
class Scalar {
public:
  Scalar() = default;
  Scalar(long v) : re_(v) {}
  Scalar(Rational re) : re_(std::move(re)) { re_.canonicalize(); }
  Scalar(Rational re, Rational im) : re_(std::move(re)), im_(std::move(im))
  {
    re_.canonicalize();
    im_.canonicalize();
  }

  static Scalar i() { return Scalar(Rational(0), Rational(1)); }
  static Scalar imag(Rational v) { return Scalar(Rational(0), std::move(v)); }

  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }

  bool is_zero() const { return sgn(re_) == 0 && sgn(im_) == 0; }
  bool is_real() const { return sgn(im_) == 0; }
  bool is_imaginary() const { return sgn(re_) == 0 && sgn(im_) != 0; }
  bool is_one() const { return re_ == 1 && sgn(im_) == 0; }

  Scalar operator-() const { return Scalar(-re_, -im_); }

  Scalar& operator+=(const Scalar& o)
  {
    re_ += o.re_;
    im_ += o.im_;
    return *this;
  }
  Scalar& operator-=(const Scalar& o)
  {
    re_ -= o.re_;
    im_ -= o.im_;
    return *this;
  }
  Scalar& operator*=(const Scalar& o)
  {
    if (is_real() && o.is_real()) {
      re_ *= o.re_;
      return *this;
    }
    Rational r = re_ * o.re_ - im_ * o.im_;
    Rational m = re_ * o.im_ + im_ * o.re_;
    re_ = std::move(r);
    im_ = std::move(m);
    return *this;
  }
  Scalar& operator/=(const Scalar& o)
  {
    *this *= o.inverse();
    return *this;
  }

  Scalar inverse() const
  {
    if (is_zero())
      throw DivisionByZero();
    if (is_real())
      return Scalar(Rational(1) / re_);
    Rational norm = re_ * re_ + im_ * im_;
    return Scalar(re_ / norm, -im_ / norm);
  }

  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
  friend Scalar operator/(Scalar a, const Scalar& b) { return a /= b; }

  friend bool operator==(const Scalar& a, const Scalar& b)
  {
    return a.re_ == b.re_ && a.im_ == b.im_;
  }
  friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }

  std::size_t hash() const
  {
    auto mix = [](std::size_t h, const mpz_class& z) {
      std::size_t v = static_cast<std::size_t>(mpz_size(z.get_mpz_t()) > 0
                                                   ? mpz_getlimbn(z.get_mpz_t(), 0)
                                                   : 0);
      v ^= static_cast<std::size_t>(mpz_sgn(z.get_mpz_t()) + 1) << 1;
      return h * 1000003u ^ v;
    };
    std::size_t h = 17;
    h = mix(h, re_.get_num());
    h = mix(h, re_.get_den());
    h = mix(h, im_.get_num());
    return mix(h, im_.get_den());
  }

  // "3", "-1/2", "2*i", "-i", "(1+2*i)"
  std::string to_string() const
  {
    if (is_real())
      return re_.get_str();
    std::string imag_part;
    if (im_ == 1)
      imag_part = "i";
    else if (im_ == -1)
      imag_part = "-i";
    else
      imag_part = im_.get_str() + "*i";
    if (sgn(re_) == 0)
      return imag_part;
    std::string out = "(" + re_.get_str();
    if (imag_part.front() != '-')
      out += "+";
    return out + imag_part + ")";
  }

private:
  Rational re_{0};
  Rational im_{0};
};

inline std::string to_string(const Scalar& s) { return s.to_string(); }

inline Rational factorial(unsigned n)
{
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return Rational(f);
}

inline Rational binomial(long n, long k)
{
  if (k < 0 || n < 0 || k > n)
    return Rational(0);
  mpz_class b;
  mpz_bin_uiui(b.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return Rational(b);
}

} // namespace fdiff
