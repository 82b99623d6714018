#pragma once

#include "fdiff/power_series.hpp"

#include <map>

namespace fdiff {

// Field diffeomorphism phi = rho + a_1 rho^2 + a_2 rho^3 + ...; a_0 = 1 always.
// Unbound a_j are the free symbols a_j, or zero when symbolic is false.
struct DiffeoSpec {
  std::map<int, RationalFunction> a;
  bool symbolic = true;
  int max_order = 10;

  static DiffeoSpec symbolic_spec(int max_order = 10) { return DiffeoSpec{{}, true, max_order}; }
  static DiffeoSpec bound(std::map<int, RationalFunction> values, int max_order = 10)
  {
    return DiffeoSpec{std::move(values), false, max_order};
  }

  RationalFunction coeff(int j) const
  {
    if (j < 0)
      throw Error("negative diffeomorphism index");
    if (j == 0)
      return RationalFunction(1);
    auto it = a.find(j);
    if (it != a.end())
      return it->second;
    return symbolic ? RationalFunction(Symbol::diffeo(j)) : RationalFunction();
  }

  void validate() const
  {
    auto it = a.find(0);
    if (it != a.end() && it->second != RationalFunction(1))
      throw Error("diffeomorphism must be tangent to identity (a0 = 1)");
    for (auto& [j, v] : a) {
      if (j < 0)
        throw Error("negative diffeomorphism index");
      if (v.contains_if([](Symbol s) { return s.is_edge(); }))
        throw Error("diffeomorphism coefficient a" + std::to_string(j) +
                    " may not depend on edge variables");
    }
  }

  // Series phi(rho) to the given order.
  PowerSeries series(int order) const
  {
    PowerSeries s(order);
    for (int k = 1; k <= order; ++k)
      s[k] = coeff(k - 1);
    return s;
  }

  // j! a_{j-1} for j = 1..n, the argument list (1!a_0, 2!a_1, ...).
  std::vector<RationalFunction> factorial_args(int n) const
  {
    std::vector<RationalFunction> v;
    for (int j = 1; j <= n; ++j)
      v.push_back(coeff(j - 1).scaled(Scalar(factorial(static_cast<unsigned>(j)))));
    return v;
  }
};

struct VertexCoefficients {
  RationalFunction f, c, g;
};

// f_n = B_{n-2,1}(2!a_1, 3!a_2, ...) + B_{n-2,2}(2!a_1, ...),
// c_{n-2} = B_{n,2}(1, 2!a_1, ...), g_n = n f_n - c_{n-2}.
inline VertexCoefficients vertex_coefficients(int n, const DiffeoSpec& d)
{
  if (n < 2)
    throw Error("vertex_coefficients needs n >= 2");
  auto full = d.factorial_args(n);
  std::vector<RationalFunction> shifted(full.begin() + 1, full.end());
  VertexCoefficients v;
  v.f = bell_partial(n - 2, 1, shifted) + bell_partial(n - 2, 2, shifted);
  v.c = bell_partial(n, 2, full);
  v.g = v.f.scaled(Scalar(n)) - v.c;
  return v;
}

// g_n = n (n-2)!/2 sum_{k=0}^{n-2} a_{n-k-2} a_k (n-k-2) k.
inline RationalFunction g_explicit_sum(int n, const DiffeoSpec& d)
{
  Accumulator acc;
  for (int k = 0; k <= n - 2; ++k)
    acc.add_scaled(d.coeff(n - k - 2) * d.coeff(k), Scalar(Rational((n - k - 2) * k)));
  return acc.result().scaled(Scalar(Rational(n) * factorial(static_cast<unsigned>(n - 2)) / 2));
}

// b_1 = 1, b_{n+1} = sum_{k=1}^n (n+k)!/n! B_{n,k}(-1!a_1, -2!a_2, ..., -n!a_n).
inline RationalFunction bn_closed_form(int n, const DiffeoSpec& d)
{
  if (n < 1)
    throw Error("bn_closed_form needs n >= 1");
  if (n == 1)
    return RationalFunction(1);
  int m = n - 1;
  std::vector<RationalFunction> args;
  for (int j = 1; j <= m; ++j)
    args.push_back(d.coeff(j).scaled(-Scalar(factorial(static_cast<unsigned>(j)))));
  BellTable bell(m, args);
  Accumulator acc;
  for (int k = 1; k <= m; ++k)
    acc.add_scaled(bell(m, k),
                   Scalar(factorial(static_cast<unsigned>(m + k)) / factorial(static_cast<unsigned>(m))));
  return acc.result();
}

// b_n = n! [phi^n] rho(phi), read off the inverted series.
inline RationalFunction bn_from_inverse(int n, const DiffeoSpec& d, int order = 0)
{
  int N = std::max(order, n);
  PowerSeries inv = invert(d.series(N));
  return inv[n].scaled(Scalar(factorial(static_cast<unsigned>(n))));
}

// Coefficients that make the theory free at the fixed offshell value x_p:
// a_{s-2} = lambda_s/((s-1)! x_p), a_{j(s-2)} = a_{s-2}^j F_j(s-1, 1), zero elsewhere.
inline DiffeoSpec adiabatic_coeffs(int s, int max_j, const RationalFunction& lambda)
{
  if (s < 3)
    throw Error("adiabatic_coeffs needs s >= 3");
  RationalFunction base =
      lambda.scaled(Scalar(Rational(1) / factorial(static_cast<unsigned>(s - 1)))) /
      RationalFunction(Symbol::fixed_offshell());
  std::map<int, RationalFunction> a;
  for (int k = 1; k <= max_j; ++k) {
    if (k % (s - 2) != 0) {
      a[k] = RationalFunction();
      continue;
    }
    int j = k / (s - 2);
    a[k] = base.pow(static_cast<unsigned>(j)).scaled(Scalar(fuss_catalan(j, s - 1, 1)));
  }
  return DiffeoSpec::bound(std::move(a), max_j);
}

inline DiffeoSpec adiabatic_coeffs(int s, int max_j)
{
  return adiabatic_coeffs(s, max_j, RationalFunction(Symbol::coupling(s)));
}

// -i lambda_s B_{n,s}(1!a_0, 2!a_1, ...): the n-point vertex induced by phi^s.
inline RationalFunction interaction_vertex(int n, int s, const RationalFunction& lambda, const DiffeoSpec& d)
{
  if (s < 3)
    throw Error("interaction power must be >= 3");
  if (n < s)
    return {};
  return (lambda * bell_partial(n, s, d.factorial_args(n))).scaled(-Scalar::i());
}

// Terms -i lambda_s B_{k,s}(1, 2!a_1, ...) B_{n,k}(b_1, b_2, ...) for k = s..n,
// indexed by k. Their sum is S^{(s)}_n.
inline std::map<int, RationalFunction> sn_bell_terms(int s, int n, const RationalFunction& lambda,
                                                     const DiffeoSpec& d,
                                                     const std::vector<RationalFunction>& b)
{
  if (static_cast<int>(b.size()) < n)
    throw Error("sn_bell_formula needs b_1..b_n");
  BellTable bb(n, b);
  std::map<int, RationalFunction> out;
  for (int k = s; k <= n; ++k)
    out[k] = interaction_vertex(k, s, lambda, d) * bb(n, k);
  return out;
}

inline RationalFunction sn_bell_formula(int s, int n, const RationalFunction& lambda, const DiffeoSpec& d,
                                        const std::vector<RationalFunction>& b)
{
  RationalFunction sum;
  for (auto& [k, v] : sn_bell_terms(s, n, lambda, d, b))
    sum += v;
  return sum;
}

inline std::vector<RationalFunction> bn_closed_forms(int n, const DiffeoSpec& d)
{
  std::vector<RationalFunction> b;
  for (int k = 1; k <= n; ++k)
    b.push_back(bn_closed_form(k, d));
  return b;
}

} // namespace fdiff
