#pragma once

#include "fdiff/coefficients.hpp"

#include <array>
#include <mutex>
#include <optional>
#include <unordered_map>

namespace fdiff {

// Momentum-conservation context for leg subsets. In a rooted context bit 0
// stands for the root leg and is never stored; in an unrooted context the
// stored block is the one containing leg 1, except that a block whose
// complement is a single leg is stored as that leg.
struct EdgeContext {
  LegMask universe = 0;
  bool rooted = false;

  static EdgeContext rooted_over(int n_leaves)
  {
    check_leaves(n_leaves);
    return {(leg_bit(n_leaves + 1) - 1), true};
  }
  static EdgeContext unrooted_over(int n_legs)
  {
    check_leaves(n_legs);
    return {(leg_bit(n_legs + 1) - 1) & ~LegMask{1}, false};
  }

  LegMask canonical(LegMask m) const
  {
    if ((m & ~universe) != 0)
      throw Error("leg subset outside the context");
    if (m == 0 || m == universe)
      throw Error("leg subset carries zero momentum");
    LegMask c = universe ^ m;
    if (rooted)
      return (m & 1u) ? c : m;
    if (leg_count(c) == 1)
      return c;
    if (leg_count(m) == 1)
      return m;
    return (m & leg_bit(1)) ? m : c;
  }

  friend bool operator==(const EdgeContext&, const EdgeContext&) = default;

private:
  static void check_leaves(int n)
  {
    if (n < 1 || n > max_leg_label - 1)
      throw Error("leg count out of range: " + std::to_string(n));
  }
};

// Offshell variable of an edge, identified by the legs whose momenta flow into it.
struct EdgeVar {
  LegMask legs = 0;
  EdgeContext context;

  LegMask canonical() const { return context.canonical(legs); }
  bool is_singleton() const { return leg_count(canonical()) == 1; }
  Symbol symbol(bool generalized = false) const { return Symbol::edge(canonical(), generalized); }
};

struct Interaction {
  int s = 3;
  RationalFunction lambda;
};

struct TheorySpec {
  enum class Propagator { Standard, Generalized };

  Propagator propagator = Propagator::Standard;
  RationalFunction mass_sq = RationalFunction(Symbol::mass_sq());
  std::map<int, RationalFunction> beta; // generalized propagator X = sum beta_k (p^2)^k
  std::vector<Interaction> interactions;

  static TheorySpec free_standard() { return {}; }
  static TheorySpec phi_s(int s)
  {
    TheorySpec t;
    t.interactions.push_back({s, RationalFunction(Symbol::coupling(s))});
    return t;
  }
  static TheorySpec generalized(std::map<int, RationalFunction> beta = {})
  {
    TheorySpec t;
    t.propagator = Propagator::Generalized;
    t.beta = std::move(beta);
    return t;
  }

  bool is_generalized() const { return propagator == Propagator::Generalized; }

  void validate() const
  {
    std::vector<int> seen;
    for (auto& in : interactions) {
      if (in.s < 3)
        throw Error("interaction power " + std::to_string(in.s) + " is below 3");
      if (std::find(seen.begin(), seen.end(), in.s) != seen.end())
        throw Error("interaction power " + std::to_string(in.s) + " listed twice");
      seen.push_back(in.s);
    }
    if (mass_sq.contains_if([](Symbol s) { return s.is_edge(); }))
      throw Error("mass may not depend on edge variables");
  }

  std::string name() const
  {
    std::string out = is_generalized() ? "generalized" : "standard";
    for (auto& in : interactions)
      out += "+phi" + std::to_string(in.s);
    return out;
  }
};

struct NonlocalSpec {
  std::map<int, RationalFunction> alpha; // alpha_0 = 1 unless given
  RationalFunction mass_sq = RationalFunction(Symbol::mass_sq());

  RationalFunction coeff(int k) const
  {
    auto it = alpha.find(k);
    if (it != alpha.end())
      return it->second;
    return k == 0 ? RationalFunction(1) : RationalFunction();
  }
  int max_index() const
  {
    int m = 0;
    for (auto& [k, v] : alpha)
      if (!v.is_zero())
        m = std::max(m, k);
    return m;
  }
};

// beta_n = sum_{k=0}^{n-1} alpha_{n-1-k} alpha_k - m^2 sum_{k=0}^{n} alpha_{n-k} alpha_k.
inline RationalFunction nonlocal_beta(int n, const NonlocalSpec& spec)
{
  if (n < 0)
    throw Error("nonlocal_beta needs n >= 0");
  Accumulator kinetic, mass;
  for (int k = 0; k <= n - 1; ++k)
    kinetic.add(spec.coeff(n - 1 - k) * spec.coeff(k));
  for (int k = 0; k <= n; ++k)
    mass.add(spec.coeff(n - k) * spec.coeff(k));
  return kinetic.result() - spec.mass_sq * mass.result();
}

inline TheorySpec theory_from_nonlocal(const NonlocalSpec& spec)
{
  std::map<int, RationalFunction> beta;
  for (int n = 0; n <= 2 * spec.max_index() + 1; ++n)
    beta[n] = nonlocal_beta(n, spec);
  auto t = TheorySpec::generalized(std::move(beta));
  t.mass_sq = spec.mass_sq;
  return t;
}

// i / x_e (or i / X_e).
inline RationalFunction propagator(const EdgeVar& e, const TheorySpec& theory)
{
  return RationalFunction(Monomial(e.symbol(theory.is_generalized()), -1), Scalar::i());
}

enum class VertexForm {
  SubsetSum, // (i/2) sum_k a_{n-k-1} a_{k-1} (n-k)! k! sum over k-subsets of adjacent momenta
  Literal,   // i f_n (sum of adjacent x) + i g_n m^2
};

// Valence-indexed coefficient tables and cached vertex polynomials for one
// (theory, diffeomorphism) pair. Thread-safe.
class VertexFactory {
public:
  VertexFactory(TheorySpec theory, DiffeoSpec diffeo) : theory_(std::move(theory)), diffeo_(std::move(diffeo))
  {
    theory_.validate();
    diffeo_.validate();
  }

  const TheorySpec& theory() const { return theory_; }
  const DiffeoSpec& diffeo() const { return diffeo_; }

  // Adjacent edges are given by their incoming leg sets; symbols whose
  // canonical mask is listed in zeros are dropped (onshell legs, cut edges).
  RationalFunction free_vertex(const std::vector<LegMask>& adjacent, const EdgeContext& ctx,
                               VertexForm form, const std::vector<LegMask>& zeros = {})
  {
    int n = static_cast<int>(adjacent.size());
    if (n < 3)
      throw Error("free vertex needs valence >= 3, got " + std::to_string(n));
    if (form == VertexForm::Literal && theory_.is_generalized())
      throw Error("literal vertex form applies to the standard propagator only");
    Key key{ctx.universe, ctx.rooted, form == VertexForm::Literal, adjacent, zeros};
    std::sort(key.adjacent.begin(), key.adjacent.end());
    std::sort(key.zeros.begin(), key.zeros.end());
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end())
        return it->second;
    }
    RationalFunction v = form == VertexForm::Literal ? literal(adjacent, ctx, zeros) : subset_sum(adjacent, ctx, zeros);
    std::lock_guard lock(mutex_);
    return cache_.emplace(std::move(key), std::move(v)).first->second;
  }

  // -i w_n^{(s)} for the given interaction.
  RationalFunction interaction(int n, const Interaction& in)
  {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, in.s);
    auto it = interaction_cache_.find(key);
    if (it != interaction_cache_.end())
      return it->second;
    auto v = interaction_vertex(n, in.s, in.lambda, diffeo_);
    interaction_cache_.emplace(key, v);
    return v;
  }

  // Sum of -i w_n^{(s)} over all interactions of the theory.
  RationalFunction all_interactions(int n)
  {
    RationalFunction sum;
    for (auto& in : theory_.interactions)
      sum += interaction(n, in);
    return sum;
  }

  // (i/2) a_{n-k-1} a_{k-1} (n-k)! k!
  RationalFunction subset_coefficient(int n, int k)
  {
    std::lock_guard lock(mutex_);
    return subset_coefficient_locked(n, k);
  }

  VertexCoefficients literal_coefficients(int n)
  {
    std::lock_guard lock(mutex_);
    auto it = literal_cache_.find(n);
    if (it != literal_cache_.end())
      return it->second;
    auto v = vertex_coefficients(n, diffeo_);
    literal_cache_.emplace(n, v);
    return v;
  }

private:
  struct Key {
    LegMask universe;
    bool rooted;
    bool literal;
    std::vector<LegMask> adjacent;
    std::vector<LegMask> zeros;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const
    {
      std::size_t h = k.universe * 0x9e3779b97f4a7c15ull + (k.rooted ? 7 : 3) + (k.literal ? 11 : 0);
      for (auto m : k.adjacent)
        h = (h ^ m) * 0xff51afd7ed558ccdull;
      h ^= 0x5bd1e995;
      for (auto m : k.zeros)
        h = (h ^ m) * 0xc4ceb9fe1a85ec53ull;
      return h;
    }
  };

  RationalFunction subset_coefficient_locked(int n, int k)
  {
    auto key = std::make_pair(n, k);
    auto it = subset_cache_.find(key);
    if (it != subset_cache_.end())
      return it->second;
    RationalFunction c = (diffeo_.coeff(n - k - 1) * diffeo_.coeff(k - 1))
                             .scaled(Scalar(Rational(0), factorial(n - k) * factorial(k) / 2));
    subset_cache_.emplace(key, c);
    return c;
  }

  RationalFunction subset_sum(const std::vector<LegMask>& adjacent, const EdgeContext& ctx,
                              const std::vector<LegMask>& zeros)
  {
    int n = static_cast<int>(adjacent.size());
    if (n > 20)
      throw Error("vertex valence too large");
    std::vector<LegMask> uni(std::size_t{1} << n, 0);
    std::map<LegMask, std::vector<long>> counts;
    for (std::size_t m = 1; m + 1 < uni.size(); ++m) {
      uni[m] = uni[m & (m - 1)] | adjacent[static_cast<std::size_t>(std::countr_zero(m))];
      LegMask c = ctx.canonical(uni[m]);
      if (std::find(zeros.begin(), zeros.end(), c) != zeros.end())
        continue;
      auto& row = counts[c];
      row.resize(static_cast<std::size_t>(n), 0);
      ++row[static_cast<std::size_t>(std::popcount(m))];
    }
    std::vector<RationalFunction> coef(static_cast<std::size_t>(n));
    {
      std::lock_guard lock(mutex_);
      for (int k = 1; k < n; ++k)
        coef[static_cast<std::size_t>(k)] = subset_coefficient_locked(n, k);
    }
    Accumulator acc;
    for (auto& [c, row] : counts) {
      RationalFunction x(Symbol::edge(c, theory_.is_generalized()));
      for (int k = 1; k < n; ++k)
        if (row[static_cast<std::size_t>(k)] != 0)
          acc.add_scaled(coef[static_cast<std::size_t>(k)] * x, Scalar(row[static_cast<std::size_t>(k)]));
    }
    return acc.result();
  }

  RationalFunction literal(const std::vector<LegMask>& adjacent, const EdgeContext& ctx,
                           const std::vector<LegMask>& zeros)
  {
    int n = static_cast<int>(adjacent.size());
    auto vc = literal_coefficients(n);
    Accumulator sum;
    for (LegMask m : adjacent) {
      LegMask c = ctx.canonical(m);
      if (std::find(zeros.begin(), zeros.end(), c) == zeros.end())
        sum.add(Monomial(Symbol::edge(c)), Scalar(1));
    }
    return (vc.f * sum.result() + vc.g * theory_.mass_sq).scaled(Scalar::i());
  }

  TheorySpec theory_;
  DiffeoSpec diffeo_;
  std::mutex mutex_;
  std::unordered_map<Key, RationalFunction, KeyHash> cache_;
  std::map<std::pair<int, int>, RationalFunction> interaction_cache_;
  std::map<std::pair<int, int>, RationalFunction> subset_cache_;
  std::map<int, VertexCoefficients> literal_cache_;
};

// Standalone vertex rules for n external legs 1..n meeting at one vertex.
inline std::vector<LegMask> single_legs(int n)
{
  std::vector<LegMask> v;
  for (int j = 1; j <= n; ++j)
    v.push_back(leg_bit(j));
  return v;
}

// i f_n (x_1 + ... + x_n) + i g_n m^2 over the given adjacent edges.
inline RationalFunction free_vertex(const std::vector<EdgeVar>& adjacent, const DiffeoSpec& d,
                                    const RationalFunction& mass_sq = RationalFunction(Symbol::mass_sq()))
{
  int n = static_cast<int>(adjacent.size());
  if (n < 3)
    throw Error("free vertex needs valence >= 3 (the 2-point part is the propagator)");
  auto vc = vertex_coefficients(n, d);
  RationalFunction sum;
  for (auto& e : adjacent)
    sum += RationalFunction(e.symbol(false));
  return (vc.f * sum + vc.g * mass_sq).scaled(Scalar::i());
}

inline RationalFunction free_vertex(int n, const DiffeoSpec& d,
                                    const RationalFunction& mass_sq = RationalFunction(Symbol::mass_sq()))
{
  if (n < 3)
    throw Error("free vertex needs valence >= 3 (the 2-point part is the propagator)");
  std::vector<EdgeVar> adj;
  auto ctx = EdgeContext::unrooted_over(n);
  for (auto m : single_legs(n))
    adj.push_back({m, ctx});
  return free_vertex(adj, d, mass_sq);
}

inline RationalFunction generalized_vertex(const std::vector<EdgeVar>& adjacent, const DiffeoSpec& d,
                                           bool generalized_symbols = true)
{
  if (adjacent.size() < 3)
    throw Error("generalized vertex needs valence >= 3");
  auto ctx = adjacent.front().context;
  std::vector<LegMask> masks;
  for (auto& e : adjacent) {
    if (!(e.context == ctx))
      throw Error("adjacent edges must share one conservation context");
    masks.push_back(e.legs);
  }
  TheorySpec t = generalized_symbols ? TheorySpec::generalized() : TheorySpec::free_standard();
  VertexFactory f(t, d);
  return f.free_vertex(masks, ctx, VertexForm::SubsetSum);
}

inline RationalFunction generalized_vertex(int n, const DiffeoSpec& d, bool generalized_symbols = true)
{
  std::vector<EdgeVar> adj;
  auto ctx = EdgeContext::unrooted_over(n);
  for (auto m : single_legs(n))
    adj.push_back({m, ctx});
  return generalized_vertex(adj, d, generalized_symbols);
}

// Terms of generalized_vertex(n) coming from the k-element subsets only.
inline RationalFunction generalized_vertex_part(int n, int k, const DiffeoSpec& d, bool generalized_symbols = true)
{
  auto ctx = EdgeContext::unrooted_over(n);
  auto legs = single_legs(n);
  VertexFactory f(generalized_symbols ? TheorySpec::generalized() : TheorySpec::free_standard(), d);
  RationalFunction coef = f.subset_coefficient(n, k);
  Accumulator acc;
  for (std::uint32_t m = 1; m + 1 < (1u << n); ++m) {
    if (std::popcount(m) != k)
      continue;
    LegMask u = 0;
    for (int j = 0; j < n; ++j)
      if (m & (1u << j))
        u |= legs[static_cast<std::size_t>(j)];
    acc.add(coef * RationalFunction(Symbol::edge(ctx.canonical(u), generalized_symbols)));
  }
  return acc.result();
}

inline RationalFunction total_vertex(const std::vector<EdgeVar>& adjacent, const TheorySpec& theory,
                                     const DiffeoSpec& d)
{
  if (theory.is_generalized())
    throw Error("total_vertex needs the standard propagator");
  theory.validate();
  RationalFunction v = free_vertex(adjacent, d, theory.mass_sq);
  for (auto& in : theory.interactions)
    v += interaction_vertex(static_cast<int>(adjacent.size()), in.s, in.lambda, d);
  return v;
}

inline RationalFunction total_vertex(int n, const TheorySpec& theory, const DiffeoSpec& d)
{
  std::vector<EdgeVar> adj;
  auto ctx = EdgeContext::unrooted_over(n);
  for (auto m : single_legs(n))
    adj.push_back({m, ctx});
  return total_vertex(adj, theory, d);
}

// Expanded form of the total vertex, one Bell sum per term, as an
// independent path for tests.
inline RationalFunction total_vertex_expanded(int n, const TheorySpec& theory, const DiffeoSpec& d)
{
  auto full = d.factorial_args(n);
  std::vector<RationalFunction> shifted(full.begin() + 1, full.end());
  RationalFunction f = bell_partial(n - 2, 1, shifted) + bell_partial(n - 2, 2, shifted);
  RationalFunction sumx;
  for (int j = 1; j <= n; ++j)
    sumx += RationalFunction(Symbol::edge(leg_bit(j)));
  RationalFunction v = (f * sumx).scaled(Scalar::i());
  RationalFunction g = f.scaled(Scalar(n)) - bell_partial(n, 2, full);
  v += (g * theory.mass_sq).scaled(Scalar::i());
  for (auto& in : theory.interactions)
    v -= (in.lambda * bell_partial(n, in.s, full)).scaled(Scalar::i());
  return v;
}

} // namespace fdiff
