#pragma once

#include "fdiff/polynomial.hpp"

#include <random>

namespace fdiff {

using Momentum = std::vector<Rational>;

// Exact momenta for legs 0..n (leg 0 is the root leg of rooted contexts and
// may be absent). Metric (+,-,...,-).
struct Kinematics {
  std::map<int, Momentum> p;
  int dim = 4;

  LegMask legs() const
  {
    LegMask m = 0;
    for (auto& [j, v] : p)
      m |= leg_bit(j);
    return m;
  }

  void check_conservation() const
  {
    Momentum total(static_cast<std::size_t>(dim), Rational(0));
    for (auto& [j, v] : p) {
      if (static_cast<int>(v.size()) != dim)
        throw Error("momentum of leg " + std::to_string(j) + " has wrong dimension");
      for (int mu = 0; mu < dim; ++mu)
        total[static_cast<std::size_t>(mu)] += v[static_cast<std::size_t>(mu)];
    }
    for (auto& c : total)
      if (c != 0)
        throw Error("momenta violate conservation");
  }

  // (sum_{j in mask} p_j)^2
  Rational square(LegMask mask) const
  {
    Momentum s(static_cast<std::size_t>(dim), Rational(0));
    for (int j = 0; j <= max_leg_label; ++j) {
      if (!(mask & leg_bit(j)))
        continue;
      auto it = p.find(j);
      if (it == p.end())
        throw Error("no momentum for leg " + std::to_string(j));
      for (int mu = 0; mu < dim; ++mu)
        s[static_cast<std::size_t>(mu)] += it->second[static_cast<std::size_t>(mu)];
    }
    Rational q = s[0] * s[0];
    for (int mu = 1; mu < dim; ++mu)
      q -= s[static_cast<std::size_t>(mu)] * s[static_cast<std::size_t>(mu)];
    return q;
  }
};

// Random small rational momenta on the given legs; the last leg balances the sum.
inline Kinematics random_kinematics(LegMask legs, int dim, std::mt19937_64& rng)
{
  if (dim < 2)
    throw Error("kinematics needs dimension >= 2");
  if (std::popcount(legs) < 2)
    throw Error("kinematics needs at least two legs");
  std::uniform_int_distribution<long> num(-9, 9), den(1, 5);
  Kinematics k;
  k.dim = dim;
  int last = 63 - std::countl_zero(legs);
  Momentum total(static_cast<std::size_t>(dim), Rational(0));
  for (int j = 0; j < last; ++j) {
    if (!(legs & leg_bit(j)))
      continue;
    Momentum v;
    for (int mu = 0; mu < dim; ++mu) {
      Rational c(num(rng), den(rng));
      c.canonicalize();
      v.push_back(c);
      total[static_cast<std::size_t>(mu)] += c;
    }
    k.p[j] = std::move(v);
  }
  for (auto& c : total)
    c = -c;
  k.p[last] = std::move(total);
  return k;
}

// Values of the propagator variables: x_S = P_S^2 - m^2, and
// X_S = sum_k beta_k (P_S^2)^k for generalized symbols.
struct EdgeValues {
  Rational mass_sq = 0;
  std::map<int, Rational> beta{{0, Rational(0)}, {1, Rational(1)}};

  Rational x(Rational q) const { return q - mass_sq; }
  Rational X(const Rational& q) const
  {
    Rational v = 0, pw = 1;
    int top = beta.empty() ? 0 : beta.rbegin()->first;
    for (int k = 0; k <= top; ++k) {
      auto it = beta.find(k);
      if (it != beta.end())
        v += it->second * pw;
      pw *= q;
    }
    return v;
  }
};

// Replaces every edge variable (and m^2) by its value at the given momenta.
// Other symbols stay symbolic.
inline RationalFunction evaluate_edges(const RationalFunction& r, const Kinematics& k, const EdgeValues& ev)
{
  k.check_conservation();
  Substitution sub;
  for (Symbol s : r.symbols()) {
    if (s.kind() == SymbolKind::MassSq) {
      sub[s] = RationalFunction(ev.mass_sq);
      continue;
    }
    if (!s.is_edge())
      continue;
    Rational q = k.square(s.legs());
    Rational v = s.is_generalized_edge() ? ev.X(q) : ev.x(q);
    if (v == 0 && r.denominator().exponent(s) != 0)
      throw Error("edge " + s.name() + " vanishes at these momenta but appears in a denominator");
    sub[s] = RationalFunction(v);
  }
  return r.substitute(sub);
}

inline Scalar evaluate_at_kinematics(const RationalFunction& r, const Kinematics& k, const EdgeValues& ev)
{
  RationalFunction v = evaluate_edges(r, k, ev);
  if (!v.is_constant())
    throw Error("expression keeps free symbols after kinematic evaluation: " + v.to_string());
  return v.constant_value();
}

} // namespace fdiff
