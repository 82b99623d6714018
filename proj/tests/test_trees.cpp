#include "fdiff/tree_engine.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace fdiff;

namespace {

RationalFunction P(const std::string& s) { return parse_expression(s); }
const DiffeoSpec dsym = DiffeoSpec::symbolic_spec();
const RationalFunction minus_i(-Scalar::i());

// Integer oracle: t_1 = 1, t_n = sum_{k>=2} B_{n,k}(t_1, t_2, ...).
std::vector<long long> tree_count_oracle(int max_n)
{
  std::vector<long long> t(static_cast<std::size_t>(max_n + 1), 0);
  t[1] = 1;
  auto C = [](int n, int k) {
    long long r = 1;
    for (int j = 1; j <= k; ++j)
      r = r * (n - k + j) / j;
    return r;
  };
  for (int n = 2; n <= max_n; ++n) {
    // B[m][k] over the already known t_1..t_{n-1}.
    std::vector<std::vector<long long>> B(static_cast<std::size_t>(n + 1), std::vector<long long>(static_cast<std::size_t>(n + 1), 0));
    B[0][0] = 1;
    for (int m = 1; m <= n; ++m)
      for (int k = 1; k <= m; ++k)
        for (int i = 1; i <= m - k + 1; ++i)
          if (i < n)
            B[m][k] += C(m - 1, i - 1) * t[i] * B[m - i][k - 1];
    for (int k = 2; k <= n; ++k)
      t[n] += B[n][k];
  }
  return t;
}

RationalFunction x(LegMask m, bool gen = false) { return RationalFunction(Symbol::edge(m, gen)); }
LegMask L(std::initializer_list<int> legs)
{
  LegMask m = 0;
  for (int j : legs)
    m |= leg_bit(j);
  return m;
}
RationalFunction sum_singletons(int n, bool gen = false)
{
  RationalFunction s;
  for (int j = 1; j <= n; ++j)
    s += x(leg_bit(j), gen);
  return s;
}
RationalFunction prop(LegMask m) { return RationalFunction(Monomial(Symbol::edge(m), -1), Scalar::i()); }

const TreeTopology& find_tree(const std::vector<TreeTopology>& ts, const std::string& enc)
{
  for (auto& t : ts)
    if (t.root->encoding == enc)
      return t;
  throw Error("no tree " + enc);
}

} // namespace

TEST(Enumeration, CountsMatchOracle)
{
  auto t = tree_count_oracle(8);
  EXPECT_EQ(enumerate_trees(2, true).size(), 1u);
  EXPECT_EQ(enumerate_trees(3, true).size(), 4u);
  for (int n = 1; n <= 8; ++n)
    EXPECT_EQ(static_cast<long long>(enumerate_trees(n, true).size()), t[static_cast<std::size_t>(n)]) << n;
  for (int n = 3; n <= 8; ++n)
    EXPECT_EQ(static_cast<long long>(enumerate_trees(n, false).size()), t[static_cast<std::size_t>(n - 1)]) << n;
}

TEST(Enumeration, StructuralInvariants)
{
  for (int n = 2; n <= 6; ++n) {
    std::set<std::string> seen;
    for (auto& t : enumerate_trees(n, true)) {
      EXPECT_TRUE(seen.insert(t.encoding()).second);
      auto verts = t.internal_vertices();
      for (auto& [v, p] : verts)
        EXPECT_GE(v->valence(), 3);
      // Internal vertices minus internal edges.
      EXPECT_EQ(static_cast<int>(verts.size()) - t.internal_edge_count(), 1);
      int legs = 0;
      for (auto& [v, p] : verts)
        for (auto& c : v->children)
          legs += c->is_leaf();
      EXPECT_EQ(legs, n);
    }
  }
  EXPECT_THROW(enumerate_trees(2, false), Error);
  EXPECT_THROW(enumerate_trees(0, true), Error);
}

TEST(Amplitude, SingleTrees)
{
  auto theory = TheorySpec::free_standard();
  VertexFactory f(theory, dsym);
  auto b2 = enumerate_trees(2, true);
  for (auto form : {VertexForm::Literal, VertexForm::SubsetSum}) {
    TreeSumOptions opt;
    opt.form = form;
    TreeEvaluator ev(f, EdgeContext::rooted_over(2), true, L({1, 2}), opt);
    EXPECT_EQ(ev.amplitude(b2.front(), {0}), P("-2*a1"));
  }
  // One 4-valent vertex, all legs onshell, amputated.
  auto four = enumerate_trees(4, false);
  TreeSumOptions lit;
  lit.form = VertexForm::Literal;
  TreeEvaluator ev(f, EdgeContext::unrooted_over(4), false, L({1, 2, 3, 4}), lit);
  EXPECT_EQ(ev.amplitude(find_tree(four, "(1,2,3)"), {0}), P("4*i*msq*a1^2"));

  VertexFactory g(TheorySpec::phi_s(3), dsym);
  TreeSumOptions all;
  all.mode = DecorationMode::AllVertices;
  TreeEvaluator ev3(g, EdgeContext::unrooted_over(3), false, L({1, 2, 3}), all);
  auto three = enumerate_trees(3, false);
  EXPECT_EQ(ev3.amplitude(three.front(), {3}), P("-i*lambda3"));
  EXPECT_THROW(ev3.amplitude(three.front(), {4}), Error);
  EXPECT_THROW(ev3.amplitude(three.front(), {0, 0}), Error);
}

TEST(Amplitude, SingleTreeDenominatorSquarefree)
{
  VertexFactory f(TheorySpec::phi_s(3), dsym);
  TreeSumOptions opt;
  opt.mode = DecorationMode::AllVertices;
  TreeEvaluator ev(f, EdgeContext::rooted_over(5), true, 0, opt);
  for (auto& t : enumerate_trees(5, true))
    for (auto& d : ev.decorations(t)) {
      Monomial den = ev.amplitude(t, d).denominator();
      for (auto& [s, e] : den.factors())
        EXPECT_EQ(e, 1);
    }
}

TEST(TreeSumB, WorkedExamples)
{
  auto b2 = tree_sum_b(2, dsym);
  EXPECT_EQ(b2.value, P("-2*a1"));
  EXPECT_EQ(b2.tree_count, 1);
  auto b3 = tree_sum_b(3, dsym);
  EXPECT_EQ(b3.value, P("-6*a2+12*a1^2"));
  EXPECT_EQ(b3.tree_count, 4);
  EXPECT_EQ(tree_sum_b(1, dsym).value, RationalFunction(1));
}

TEST(TreeSumB, ClosedFormAndConstancy)
{
  for (int n = 2; n <= 6; ++n) {
    auto r = tree_sum_b(n, dsym).value;
    EXPECT_EQ(r, bn_closed_form(n, dsym)) << n;
    EXPECT_EQ(r, bn_from_inverse(n, dsym)) << n;
    EXPECT_FALSE(r.contains_if([](Symbol s) { return s.kind() != SymbolKind::DiffeoCoeff; })) << n;
  }
}

TEST(TreeSumB, GeneralizedPropagator)
{
  for (int n = 2; n <= 6; ++n)
    EXPECT_EQ(tree_sum_b(n, dsym, TheorySpec::generalized()).value, bn_closed_form(n, dsym)) << n;
}

TEST(TreeSumB, OnshellTimingIrrelevant)
{
  TreeSumOptions late;
  late.onshell_after_assembly = true;
  for (int n = 2; n <= 5; ++n)
    EXPECT_EQ(tree_sum_b(n, dsym, TheorySpec::free_standard(), late).value, bn_closed_form(n, dsym)) << n;
  for (int n = 3; n <= 5; ++n) {
    auto a = tree_sum_A(n, leg_bit(2), TheorySpec::phi_s(3), dsym).value;
    auto b = tree_sum_A(n, leg_bit(2), TheorySpec::phi_s(3), dsym, late).value;
    EXPECT_EQ(a, b) << n;
  }
}

TEST(TreeSumB, ParallelMatchesSerial)
{
  TreeSumOptions par;
  par.jobs = 3;
  EXPECT_EQ(tree_sum_b(6, dsym, TheorySpec::free_standard(), par).value, tree_sum_b(6, dsym).value);
  auto s1 = s_linear_tree_sum(6, 3, dsym);
  auto s3 = s_linear_tree_sum(6, 3, dsym, par);
  EXPECT_EQ(s1.by_valence, s3.by_valence);
}

TEST(TreeSumA, OnshellVanishes)
{
  for (int n = 3; n <= 6; ++n)
    EXPECT_TRUE(tree_sum_A(n, 0, TheorySpec::free_standard(), dsym).value.is_zero()) << n;
}

TEST(TreeSumA, SingleOffshellLeg)
{
  EXPECT_EQ(tree_sum_A(4, leg_bit(4), TheorySpec::free_standard(), dsym).value,
            minus_i * bn_closed_form(3, dsym) * x(leg_bit(4)));
  for (int n = 3; n <= 6; ++n) {
    RationalFunction sym;
    for (int j = 1; j <= n; ++j)
      sym += tree_sum_A(n, leg_bit(j), TheorySpec::free_standard(), dsym).value;
    EXPECT_EQ(sym, minus_i * bn_closed_form(n - 1, dsym) * sum_singletons(n)) << n;
  }
}

TEST(TreeSumA, FourOffshellExample)
{
  auto A = tree_sum_A(4, L({1, 2, 3, 4}), TheorySpec::free_standard(), dsym).value;
  auto b2 = bn_closed_form(2, dsym), b3 = bn_closed_form(3, dsym);
  RationalFunction channels;
  for (int p = 2; p <= 4; ++p) {
    LegMask left = leg_bit(1) | leg_bit(p), right = L({1, 2, 3, 4}) & ~left;
    RationalFunction xl = 0, xr = 0;
    for (int j = 1; j <= 4; ++j)
      ((left & leg_bit(j)) ? xl : xr) += x(leg_bit(j));
    channels += xl * xr / x(left);
  }
  EXPECT_EQ(A, minus_i * b3 * sum_singletons(4) + minus_i * b2 * b2 * channels);
  // At most quadratic in the external variables.
  for (auto& [m, c] : A.terms()) {
    int deg = 0;
    for (auto& [s, e] : m.factors())
      if (s.is_edge() && leg_count(s.legs()) == 1)
        deg += e;
    EXPECT_LE(deg, 2);
  }
  EXPECT_EQ(A, glue_A44(dsym, TheorySpec::free_standard()));
  // Onshell limits leave the single-leg sum.
  EXPECT_EQ(A.set_zero({Symbol::edge(leg_bit(1)), Symbol::edge(leg_bit(2)), Symbol::edge(leg_bit(3))}),
            tree_sum_A(4, leg_bit(4), TheorySpec::free_standard(), dsym).value);
}

TEST(TreeSumA, InteractingFourPoint)
{
  auto t = TheorySpec::phi_s(3);
  auto A = tree_sum_A(4, L({1, 2, 3, 4}), t, dsym).value;
  auto A0 = tree_sum_A(4, L({1, 2, 3, 4}), TheorySpec::free_standard(), dsym).value;
  auto l3 = RationalFunction(Symbol::coupling(3));
  auto b2 = bn_closed_form(2, dsym);
  RationalFunction props = prop(L({1, 2})) + prop(L({1, 3})) + prop(L({1, 4}));
  EXPECT_EQ(A, minus_i * l3 * (minus_i * l3 + minus_i * b2 * sum_singletons(4)) * props + A0);
  EXPECT_EQ(A, glue_A44(dsym, t));
  // Onshell 1..3 with the external propagator of leg 4 reproduces b'_3.
  Substitution to_root{{Symbol::edge(leg_bit(4)), x(L({1, 2, 3}))}};
  auto onshell = A.set_zero({Symbol::edge(leg_bit(1)), Symbol::edge(leg_bit(2)), Symbol::edge(leg_bit(3))});
  auto b3p = tree_sum_bprime(3, 3, dsym, BPrimeMode::AllVertices).value;
  // Rooted x(1+2+3) and unrooted x4 name the same edge; x(1+4) is x(2+3) in the rooted labels.
  Substitution relabel{{Symbol::edge(L({1, 4})), x(L({2, 3}))}};
  EXPECT_EQ((onshell.substitute(to_root) * prop(L({1, 2, 3}))).substitute(relabel), b3p);
}

TEST(TreeSumBPrime, WorkedExamples)
{
  auto l3 = RationalFunction(Symbol::coupling(3));
  auto b2 = bn_closed_form(2, dsym), b3 = bn_closed_form(3, dsym), b4 = bn_closed_form(4, dsym);
  for (auto mode : {BPrimeMode::AllVertices, BPrimeMode::SOnly}) {
    EXPECT_EQ(tree_sum_bprime(1, 3, dsym, mode).value, RationalFunction(1));
    EXPECT_EQ(tree_sum_bprime(2, 3, dsym, mode).value, P("-2*a1 + lambda3/x(1+2)"));
    auto bp2_123 = b2 + l3 / x(L({1, 2, 3}));
    EXPECT_EQ(tree_sum_bprime(3, 3, dsym, mode).value,
              b3 + bp2_123 * minus_i * l3 * (prop(L({2, 3})) + prop(L({1, 3})) + prop(L({1, 2}))));

    // Four leaves: pairs, pairings and pair-in-triple chains.
    auto bp2_1234 = b2 + l3 / x(L({1, 2, 3, 4}));
    RationalFunction pairs, pairings, chains;
    int chain_count = 0;
    for (int a = 1; a <= 4; ++a)
      for (int b = a + 1; b <= 4; ++b) {
        LegMask pr = L({a, b});
        pairs += prop(pr);
        LegMask rest = L({1, 2, 3, 4}) & ~pr;
        if (a == 1)
          pairings += prop(pr) * prop(rest);
        for (int c = 1; c <= 4; ++c)
          if (!(pr & leg_bit(c))) {
            chains += prop(pr) * prop(pr | leg_bit(c));
            ++chain_count;
          }
      }
    EXPECT_EQ(chain_count, 12);
    auto expect = b4 + b3 * minus_i * l3 * pairs + bp2_1234 * (minus_i * l3).pow(2) * (pairings + chains);
    EXPECT_EQ(tree_sum_bprime(4, 3, dsym, mode).value, expect);
  }
}

TEST(TreeSumBPrime, BelowThresholdEqualsB)
{
  EXPECT_EQ(tree_sum_bprime(2, 4, dsym, BPrimeMode::AllVertices).value, bn_closed_form(2, dsym));
  for (int k = 2; k <= 3; ++k)
    EXPECT_EQ(tree_sum_bprime(k, 5, dsym, BPrimeMode::SOnly).value, bn_closed_form(k, dsym)) << k;
}

TEST(TreeSumBPrime, ModesAgree)
{
  for (int n = 2; n <= 5; ++n)
    EXPECT_EQ(tree_sum_bprime(n, 3, dsym, BPrimeMode::AllVertices).value,
              tree_sum_bprime(n, 3, dsym, BPrimeMode::SOnly).value)
        << n;
  for (int n = 2; n <= 5; ++n)
    EXPECT_EQ(tree_sum_bprime(n, 4, dsym, BPrimeMode::AllVertices).value,
              tree_sum_bprime(n, 4, dsym, BPrimeMode::SOnly).value)
        << n;
}

TEST(TreeSumBPrime, TraceMatchesDistributiveSum)
{
  for (auto mode : {BPrimeMode::AllVertices, BPrimeMode::SOnly}) {
    TreeSumOptions opt;
    opt.trace = true;
    auto r = tree_sum_bprime(4, 3, dsym, mode, opt);
    ASSERT_EQ(static_cast<long long>(r.trace.size()), r.decorated_count);
    Accumulator acc;
    for (auto& e : r.trace)
      acc.add(e.amplitude);
    EXPECT_EQ(acc.result(), r.value);
  }
  TreeSumOptions opt;
  opt.trace = true;
  auto s = s_linear_tree_sum(5, 3, dsym, opt);
  Accumulator acc;
  for (auto& e : s.trace)
    acc.add(e.amplitude);
  EXPECT_EQ(acc.result(), s.value);
  EXPECT_EQ(static_cast<long long>(s.trace.size()), s.decorated_count);
}

TEST(SLinear, FourPointSplit)
{
  auto r = s_linear_tree_sum(4, 3, dsym);
  EXPECT_TRUE(r.value.is_zero());
  EXPECT_EQ(r.by_valence.at(4), P("-12*i*lambda3*a1"));
  EXPECT_EQ(r.by_valence.at(3), P("12*i*lambda3*a1"));
}

TEST(SLinear, MatchesBellTermsAndDelta)
{
  for (int s = 3; s <= 4; ++s) {
    auto lambda = RationalFunction(Symbol::coupling(s));
    auto b = bn_closed_forms(6, dsym);
    for (int n = s; n <= 6; ++n) {
      auto r = s_linear_tree_sum(n, s, dsym);
      auto bell = sn_bell_terms(s, n, lambda, dsym, b);
      for (auto& [k, v] : bell) {
        auto it = r.by_valence.find(k);
        EXPECT_EQ(it == r.by_valence.end() ? RationalFunction() : it->second, v) << s << " " << n << " " << k;
      }
      EXPECT_EQ(r.value, n == s ? minus_i * lambda : RationalFunction()) << s << " " << n;
    }
  }
}

TEST(Recursive, MatchesEnumeration)
{
  EXPECT_EQ(recursive_b(2, dsym, TheorySpec::Propagator::Generalized).value, P("-2*a1"));
  EXPECT_EQ(recursive_b(3, dsym, TheorySpec::Propagator::Generalized).value, P("12*a1^2-6*a2"));
  for (int n = 1; n <= 6; ++n)
    for (auto k : {TheorySpec::Propagator::Standard, TheorySpec::Propagator::Generalized})
      EXPECT_EQ(recursive_b(n, dsym, k).value, bn_closed_form(n, dsym)) << n;
}

TEST(Generalized, SingleOffshellLeg)
{
  auto g = TheorySpec::generalized();
  for (int n = 3; n <= 6; ++n) {
    RationalFunction sym;
    for (int j = 1; j <= n; ++j)
      sym += tree_sum_A(n, leg_bit(j), g, dsym).value;
    EXPECT_EQ(sym, minus_i * bn_closed_form(n - 1, dsym) * sum_singletons(n, true)) << n;
  }
}

TEST(MetaVertex, AmputatedRootLeg)
{
  auto xp = RationalFunction(Symbol::fixed_offshell());
  for (int l = 1; l <= 4; ++l) {
    int n = l + 2;
    auto A = tree_sum_A(n, leg_bit(n), TheorySpec::free_standard(), dsym).value;
    Substitution sub{{Symbol::edge(leg_bit(n)), xp}};
    EXPECT_EQ(A.substitute(sub), minus_i * xp * bn_closed_form(l + 1, dsym)) << l;
  }
}

TEST(Adiabatic, BPrimeVanishesAtFixedOffshell)
{
  auto xp = RationalFunction(Symbol::fixed_offshell());
  for (int s = 3; s <= 4; ++s) {
    auto ad = adiabatic_coeffs(s, 10);
    for (int n = 2; n <= 5; ++n) {
      auto r = tree_sum_bprime(n, s, ad, BPrimeMode::SOnly).value;
      Substitution sub{{Symbol::edge(leg_range(1, n)), xp}};
      EXPECT_TRUE(r.substitute(sub).is_zero()) << s << " " << n;
    }
  }
}

TEST(Errors, InvalidRequests)
{
  EXPECT_THROW(tree_sum_A(2, 0, TheorySpec::free_standard(), dsym), Error);
  EXPECT_THROW(tree_sum_A(4, leg_bit(5), TheorySpec::free_standard(), dsym), Error);
  auto quartic = TheorySpec::phi_s(4);
  EXPECT_THROW(s_linear_tree_sum(4, 3, dsym, {}, &quartic), Error);
  EXPECT_THROW(glue_A44(dsym, TheorySpec::phi_s(4)), Error);
  EXPECT_THROW(tree_sum_b(0, dsym), Error);
}
