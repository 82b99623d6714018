#pragma once

#include "fdiff/combinatorics.hpp"

#include <vector>

namespace fdiff {

// Truncated series c_0 + c_1 t + ... + c_N t^N with rational-function coefficients.
class PowerSeries {
public:
  explicit PowerSeries(int order) : c_(static_cast<std::size_t>(check_order(order) + 1)) {}
  PowerSeries(int order, std::vector<RationalFunction> coeffs) : PowerSeries(order)
  {
    if (coeffs.size() > c_.size())
      throw Error("more coefficients than the truncation order allows");
    std::copy(coeffs.begin(), coeffs.end(), c_.begin());
  }

  static PowerSeries identity(int order)
  {
    PowerSeries s(order);
    if (order >= 1)
      s.c_[1] = RationalFunction(1);
    return s;
  }

  int order() const { return static_cast<int>(c_.size()) - 1; }
  const RationalFunction& operator[](int k) const { return c_.at(static_cast<std::size_t>(k)); }
  RationalFunction& operator[](int k) { return c_.at(static_cast<std::size_t>(k)); }
  const std::vector<RationalFunction>& coeffs() const { return c_; }

  friend PowerSeries operator+(const PowerSeries& a, const PowerSeries& b)
  {
    same_order(a, b);
    PowerSeries r(a.order());
    for (int k = 0; k <= a.order(); ++k)
      r[k] = a[k] + b[k];
    return r;
  }
  friend PowerSeries operator-(const PowerSeries& a, const PowerSeries& b)
  {
    same_order(a, b);
    PowerSeries r(a.order());
    for (int k = 0; k <= a.order(); ++k)
      r[k] = a[k] - b[k];
    return r;
  }
  friend PowerSeries operator*(const PowerSeries& a, const PowerSeries& b)
  {
    same_order(a, b);
    int n = a.order();
    PowerSeries r(n);
    for (int k = 0; k <= n; ++k) {
      Accumulator acc;
      for (int j = 0; j <= k; ++j)
        if (!a[j].is_zero() && !b[k - j].is_zero())
          acc.add_product(a[j], b[k - j]);
      r[k] = acc.result();
    }
    return r;
  }
  friend bool operator==(const PowerSeries& a, const PowerSeries& b) { return a.c_ == b.c_; }

  PowerSeries pow(unsigned e) const
  {
    PowerSeries r(order());
    r[0] = RationalFunction(1);
    for (unsigned k = 0; k < e; ++k)
      r = r * *this;
    return r;
  }

  bool is_zero() const
  {
    return std::all_of(c_.begin(), c_.end(), [](auto& c) { return c.is_zero(); });
  }

  std::string to_string() const
  {
    std::string out;
    for (int k = 0; k <= order(); ++k) {
      if (c_[k].is_zero())
        continue;
      if (!out.empty())
        out += " + ";
      out += "(" + c_[k].to_string() + ")";
      if (k > 0)
        out += "*t^" + std::to_string(k);
    }
    return out.empty() ? "0" : out;
  }

private:
  static int check_order(int order)
  {
    if (order < 0)
      throw Error("series order must be nonnegative");
    return order;
  }
  static void same_order(const PowerSeries& a, const PowerSeries& b)
  {
    if (a.order() != b.order())
      throw Error("series truncation orders differ");
  }

  std::vector<RationalFunction> c_;
};

// f(g(t)) via [t^n] f(g) = 1/n! sum_k k! f_k B_{n,k}(1! g_1, 2! g_2, ...).
inline PowerSeries compose(const PowerSeries& f, const PowerSeries& g)
{
  if (f.order() != g.order())
    throw Error("series truncation orders differ");
  if (!g[0].is_zero())
    throw Error("compose needs an inner series without constant term");
  int n = f.order();
  std::vector<RationalFunction> args;
  for (int j = 1; j <= n; ++j)
    args.push_back(g[j].scaled(Scalar(factorial(static_cast<unsigned>(j)))));
  BellTable bell(n, args);
  PowerSeries r(n);
  r[0] = f[0];
  for (int m = 1; m <= n; ++m) {
    Accumulator acc;
    for (int k = 1; k <= m; ++k)
      if (!f[k].is_zero())
        acc.add_scaled(f[k] * bell(m, k), Scalar(factorial(static_cast<unsigned>(k))));
    r[m] = acc.result().scaled(Scalar(Rational(1) / factorial(static_cast<unsigned>(m))));
  }
  return r;
}

// Same composition by truncated Horner substitution; kept as an independent path.
inline PowerSeries compose_naive(const PowerSeries& f, const PowerSeries& g)
{
  if (f.order() != g.order())
    throw Error("series truncation orders differ");
  if (!g[0].is_zero())
    throw Error("compose needs an inner series without constant term");
  int n = f.order();
  PowerSeries r(n);
  for (int k = n; k >= 0; --k) {
    r = r * g;
    r[0] = r[0] + f[k];
  }
  return r;
}

// Compositional inverse by Lagrange inversion:
// (f^-1)_n = 1/n! sum_{k=1}^{n-1} f_1^{-n-k} B_{n-1+k,k}(0, -2! f_2, -3! f_3, ...).
inline PowerSeries invert(const PowerSeries& f)
{
  int n = f.order();
  if (!f[0].is_zero())
    throw Error("invert needs a series without constant term");
  if (n < 1 || f[1].is_zero())
    throw Error("invert needs an invertible linear coefficient");
  if (!f[1].is_monomial())
    throw Error("invert needs a single-term linear coefficient");
  RationalFunction inv1 = RationalFunction(1) / f[1];
  std::vector<RationalFunction> args{RationalFunction()};
  for (int j = 2; j <= 2 * n; ++j)
    args.push_back(j <= n ? f[j].scaled(-Scalar(factorial(static_cast<unsigned>(j)))) : RationalFunction());
  BellTable bell(2 * n, args);
  PowerSeries r(n);
  r[1] = inv1;
  for (int m = 2; m <= n; ++m) {
    Accumulator acc;
    for (int k = 1; k <= m - 1; ++k) {
      const RationalFunction& b = bell(m - 1 + k, k);
      if (!b.is_zero())
        acc.add(inv1.pow(static_cast<unsigned>(m + k)) * b);
    }
    r[m] = acc.result().scaled(Scalar(Rational(1) / factorial(static_cast<unsigned>(m))));
  }
  return r;
}

// sum_m F_m(a, b) t^m up to order N.
inline PowerSeries fc_series(long a, long b, int order)
{
  PowerSeries s(order);
  for (int m = 0; m <= order; ++m)
    s[m] = RationalFunction(fuss_catalan(m, a, b));
  return s;
}

// Residual C - (t C^a + 1) of the b = 1 functional equation; zero when C is
// the Fuss-Catalan series.
inline PowerSeries fc_functional_residual(const PowerSeries& c, long a)
{
  int n = c.order();
  PowerSeries t(n);
  if (n >= 1)
    t[1] = RationalFunction(1);
  PowerSeries rhs = t * c.pow(static_cast<unsigned>(a));
  rhs[0] = rhs[0] + RationalFunction(1);
  return c - rhs;
}

} // namespace fdiff
