#pragma once

#include "fdiff/kinematics.hpp"
#include "fdiff/tree_engine.hpp"

#include <atomic>
#include <chrono>
#include <optional>

namespace fdiff {

// Deliberate perturbation a_j -> a_j + delta applied to one side of a check.
struct Fault {
  int coefficient = 2;
  Rational delta = 1;
};

struct CheckSpec {
  std::string name;
  int max_n = 0; // 0: check default
  int s = 3;
  int order = 10;
  int trials = 50;
  std::uint64_t seed = 1;
  int dim = 4;
  int jobs = 1;
  DiffeoSpec diffeo = DiffeoSpec::symbolic_spec();
  std::optional<Fault> fault;

  void validate() const;
};

struct Witness {
  int n = 0;
  std::string quantity;
  std::string tree;
  std::string residual;

  bool empty() const { return quantity.empty() && residual.empty(); }
};

enum class Status { Pass, Fail, Skipped };

inline std::string to_string(Status s)
{
  switch (s) {
  case Status::Pass: return "pass";
  case Status::Fail: return "fail";
  case Status::Skipped: return "skipped";
  }
  return "?";
}

struct Report {
  std::string name;
  std::vector<std::pair<std::string, std::string>> params;
  Status status = Status::Pass;
  Witness witness;
  std::vector<std::string> notes;
  std::optional<double> wall_ms;

  bool passed() const { return status != Status::Fail; }
};

inline const std::vector<std::string>& known_checks()
{
  static const std::vector<std::string> names{"bn",          "smatrix_free", "interaction", "bprime", "adiabatic",
                                              "generalized", "nonlocal",     "kinematics"};
  return names;
}

inline int default_max_n(const std::string& name)
{
  if (name == "interaction")
    return 8;
  if (name == "bprime" || name == "generalized" || name == "nonlocal")
    return 6;
  if (name == "kinematics")
    return 5;
  return 7;
}

inline void CheckSpec::validate() const
{
  auto& k = known_checks();
  if (std::find(k.begin(), k.end(), name) == k.end())
    throw Error("unknown check '" + name + "'");
  int n = max_n ? max_n : default_max_n(name);
  int lo = name == "interaction" ? s : (name == "smatrix_free" || name == "kinematics") ? 3 : 2;
  if (n < lo)
    throw Error("check " + name + " needs max_n >= " + std::to_string(lo));
  if (n > 10)
    throw Error("max_n above 10 is not supported");
  if (s < 3)
    throw Error("interaction power must be >= 3");
  if (order < n || order > 30)
    throw Error("truncation order must lie between max_n and 30");
  if (trials < 1)
    throw Error("kinematic trials must be positive");
  if (dim < 2)
    throw Error("spacetime dimension must be >= 2");
  if (jobs < 1)
    throw Error("jobs must be positive");
  if (fault && fault->coefficient < 1)
    throw Error("fault must target a coefficient a_j with j >= 1");
  diffeo.validate();
}

namespace detail {

inline DiffeoSpec perturbed(const DiffeoSpec& d, const std::optional<Fault>& f)
{
  if (!f)
    return d;
  DiffeoSpec out = d;
  out.a[f->coefficient] = d.coeff(f->coefficient) + RationalFunction(f->delta);
  return out;
}

// Records the first failure; later comparisons are skipped once failed.
class Outcome {
public:
  explicit Outcome(Report& r) : r_(r) {}

  bool failed() const { return r_.status == Status::Fail; }

  bool expect_equal(int n, const std::string& quantity, const RationalFunction& got, const RationalFunction& want,
                    const std::string& tree = "")
  {
    if (failed())
      return false;
    RationalFunction diff = got - want;
    if (diff.is_zero())
      return true;
    fail(n, quantity, diff.to_string(), tree);
    return false;
  }

  void fail(int n, const std::string& quantity, const std::string& residual, const std::string& tree = "")
  {
    if (failed())
      return;
    r_.status = Status::Fail;
    r_.witness = {n, quantity, tree, residual.empty() ? "?" : residual};
  }

private:
  Report& r_;
};

inline RationalFunction singleton_sum(int n, bool gen)
{
  RationalFunction s;
  for (int j = 1; j <= n; ++j)
    s += RationalFunction(Symbol::edge(leg_bit(j), gen));
  return s;
}

inline RationalFunction inv_edge(LegMask m)
{
  return RationalFunction(Monomial(Symbol::edge(m), -1), Scalar::i());
}

inline TreeSumOptions options(const CheckSpec& c)
{
  TreeSumOptions o;
  o.jobs = c.jobs;
  return o;
}

// A(n, {j}) = -i b_{n-1} X_j for every single offshell leg j.
inline void single_offshell_legs(Outcome& out, const CheckSpec& c, const TheorySpec& theory, const DiffeoSpec& oracle,
                                 int max_n, const std::string& label)
{
  bool gen = theory.is_generalized();
  for (int n = 3; n <= max_n && !out.failed(); ++n) {
    RationalFunction b = bn_closed_form(n - 1, oracle);
    for (int j = 1; j <= n; ++j) {
      auto A = tree_sum_A(n, leg_bit(j), theory, c.diffeo, options(c)).value;
      RationalFunction xj(Symbol::edge(leg_bit(j), gen));
      if (!out.expect_equal(n, label + " with leg " + std::to_string(j) + " offshell", A,
                            RationalFunction(-Scalar::i()) * b * xj))
        return;
    }
  }
}

// Worked four-leaf b'_n expression for a cubic interaction.
inline RationalFunction bprime_four_cubic(const DiffeoSpec& d, const RationalFunction& l3)
{
  RationalFunction mil = RationalFunction(-Scalar::i()) * l3;
  LegMask all = leg_range(1, 4);
  RationalFunction pairs, pairings, chains;
  for (int a = 1; a <= 4; ++a)
    for (int b = a + 1; b <= 4; ++b) {
      LegMask pr = leg_bit(a) | leg_bit(b);
      pairs += inv_edge(pr);
      if (a == 1)
        pairings += inv_edge(pr) * inv_edge(all & ~pr);
      for (int k = 1; k <= 4; ++k)
        if (!(pr & leg_bit(k)))
          chains += inv_edge(pr) * inv_edge(pr | leg_bit(k));
    }
  RationalFunction bp2 = bn_closed_form(2, d) + l3 / RationalFunction(Symbol::edge(all));
  return bn_closed_form(4, d) + bn_closed_form(3, d) * mil * pairs + bp2 * mil * mil * (pairings + chains);
}

} // namespace detail

inline Report make_report(const CheckSpec& c)
{
  Report r;
  r.name = c.name;
  int n = c.max_n ? c.max_n : default_max_n(c.name);
  r.params.emplace_back("max_n", std::to_string(n));
  if (c.name == "interaction" || c.name == "bprime" || c.name == "adiabatic")
    r.params.emplace_back("s", std::to_string(c.s));
  if (c.name == "bn")
    r.params.emplace_back("order", std::to_string(c.order));
  if (c.name == "kinematics") {
    r.params.emplace_back("trials", std::to_string(c.trials));
    r.params.emplace_back("seed", std::to_string(c.seed));
    r.params.emplace_back("dim", std::to_string(c.dim));
  }
  if (c.fault)
    r.params.emplace_back("fault", "a" + std::to_string(c.fault->coefficient) + "+=" + c.fault->delta.get_str());
  return r;
}

// Enumerated b_n against the closed form and the inverse series (oracle side carries the fault).
inline Report check_bn(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  DiffeoSpec oracle = detail::perturbed(c.diffeo, c.fault);
  for (int n = 2; n <= max_n && !out.failed(); ++n) {
    auto t = tree_sum_b(n, c.diffeo, TheorySpec::free_standard(), detail::options(c));
    auto sym = t.value.symbols();
    for (Symbol s : sym)
      if (s.is_edge() || s.kind() == SymbolKind::MassSq || s.kind() == SymbolKind::Coupling)
        out.fail(n, "b_" + std::to_string(n) + " depends on " + s.name(), t.value.to_string());
    out.expect_equal(n, "b_" + std::to_string(n) + " enumeration - closed form", t.value, bn_closed_form(n, oracle));
    out.expect_equal(n, "b_" + std::to_string(n) + " enumeration - inverse series", t.value,
                     bn_from_inverse(n, oracle, c.order));
  }
  return r;
}

// A^0_n = 0 and A^1_n = -i b_{n-1} x_j in the free theory.
inline Report check_smatrix_free(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  auto theory = TheorySpec::free_standard();
  for (int n = 3; n <= max_n && !out.failed(); ++n)
    out.expect_equal(n, "A^0_" + std::to_string(n), tree_sum_A(n, 0, theory, c.diffeo, detail::options(c)).value,
                     RationalFunction());
  detail::single_offshell_legs(out, c, theory, detail::perturbed(c.diffeo, c.fault), max_n, "A^1");
  return r;
}

// S^(s)_n by enumeration, split by the valence of the interaction vertex,
// against the Bell-sum terms and against -i lambda_s delta_{ns}.
inline Report check_interaction_cancellation(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  DiffeoSpec oracle = detail::perturbed(c.diffeo, c.fault);
  RationalFunction lambda(Symbol::coupling(c.s));
  auto b = bn_closed_forms(max_n, oracle);
  for (int n = c.s; n <= max_n && !out.failed(); ++n) {
    auto t = s_linear_tree_sum(n, c.s, c.diffeo, detail::options(c));
    auto bell = sn_bell_terms(c.s, n, lambda, oracle, b);
    for (int k = c.s; k <= n; ++k) {
      auto it = t.by_valence.find(k);
      RationalFunction got = it == t.by_valence.end() ? RationalFunction() : it->second;
      out.expect_equal(n, "S_" + std::to_string(n) + " part with a " + std::to_string(k) + "-valent interaction",
                       got, bell[k]);
    }
    RationalFunction delta = n == c.s ? RationalFunction(-Scalar::i()) * lambda : RationalFunction();
    out.expect_equal(n, "S_" + std::to_string(n) + " total", t.value, delta);
    out.expect_equal(n, "S_" + std::to_string(n) + " Bell sum", sn_bell_formula(c.s, n, lambda, oracle, b), delta);
  }
  return r;
}

// b'_n in the all-vertex and s-only modes, plus worked values.
inline Report check_bprime(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  DiffeoSpec oracle = detail::perturbed(c.diffeo, c.fault);
  RationalFunction lambda(Symbol::coupling(c.s));
  for (int n = 1; n <= max_n && !out.failed(); ++n) {
    auto all = tree_sum_bprime(n, c.s, c.diffeo, BPrimeMode::AllVertices, detail::options(c)).value;
    auto only = tree_sum_bprime(n, c.s, c.diffeo, BPrimeMode::SOnly, detail::options(c)).value;
    std::string tag = "b'_" + std::to_string(n);
    out.expect_equal(n, tag + " all vertices - s-valent only", all, only);
    if (n < c.s - 1)
      out.expect_equal(n, tag + " - b_" + std::to_string(n), all, bn_closed_form(n, oracle));
    if (c.s == 3 && n == 2)
      out.expect_equal(n, tag + " worked value", all,
                       bn_closed_form(2, oracle) + lambda / RationalFunction(Symbol::edge(leg_range(1, 2))));
    if (c.s == 3 && n == 3) {
      RationalFunction bp2 = bn_closed_form(2, oracle) + lambda / RationalFunction(Symbol::edge(leg_range(1, 3)));
      RationalFunction props = detail::inv_edge(leg_bit(2) | leg_bit(3)) + detail::inv_edge(leg_bit(1) | leg_bit(3)) +
                               detail::inv_edge(leg_bit(1) | leg_bit(2));
      out.expect_equal(n, tag + " worked value", all,
                       bn_closed_form(3, oracle) + bp2 * RationalFunction(-Scalar::i()) * lambda * props);
    }
    if (c.s == 3 && n == 4)
      out.expect_equal(n, tag + " worked value", all, detail::bprime_four_cubic(oracle, lambda));
  }
  return r;
}

// Fuss-Catalan coefficients: b_k = 0 (k != s-1), b_{s-1} = -lambda_s/x_p, and
// b'_n = 0 once the root variable is x_p. The fault perturbs the coefficients.
inline Report check_adiabatic(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  RationalFunction lambda(Symbol::coupling(c.s));
  RationalFunction xp(Symbol::fixed_offshell());
  DiffeoSpec ad = detail::perturbed(adiabatic_coeffs(c.s, std::max(c.order, max_n), lambda), c.fault);

  PowerSeries residual = fc_functional_residual(fc_series(c.s - 1, 1, c.order), c.s - 1);
  if (!residual.is_zero())
    out.fail(0, "Fuss-Catalan functional equation", residual.to_string());

  for (int k = 2; k <= max_n && !out.failed(); ++k) {
    RationalFunction want = k == c.s - 1 ? -(lambda / xp) : RationalFunction();
    std::string tag = "b_" + std::to_string(k);
    out.expect_equal(k, tag + " closed form", bn_closed_form(k, ad), want);
    out.expect_equal(k, tag + " enumeration", tree_sum_b(k, ad, TheorySpec::free_standard(), detail::options(c)).value,
                     want);
  }
  for (int n = 2; n <= max_n && !out.failed(); ++n) {
    auto v = tree_sum_bprime(n, c.s, ad, BPrimeMode::SOnly, detail::options(c)).value;
    Substitution root{{Symbol::edge(leg_range(1, n)), xp}};
    out.expect_equal(n, "b'_" + std::to_string(n) + " at root x_p", v.substitute(root), RationalFunction());
  }
  return r;
}

namespace detail {

inline void generalized_suite(Outcome& out, const CheckSpec& c, const TheorySpec& theory, int max_n)
{
  DiffeoSpec oracle = perturbed(c.diffeo, c.fault);
  single_offshell_legs(out, c, theory, oracle, max_n, "generalized A^1");
  for (int n = 1; n <= max_n && !out.failed(); ++n) {
    auto rec = recursive_b(n, c.diffeo, TheorySpec::Propagator::Generalized).value;
    auto en = tree_sum_b(n, c.diffeo, theory, options(c)).value;
    out.expect_equal(n, "recursive b_" + std::to_string(n) + " - enumeration", rec, en);
    out.expect_equal(n, "recursive b_" + std::to_string(n) + " - closed form", rec, bn_closed_form(n, oracle));
  }
  // Subtree v_j (i/X_e) v_k against the merged vertex, X_e coefficients only.
  VertexFactory f(theory, c.diffeo);
  VertexFactory fo(theory, oracle);
  for (int j = 3; j <= 5 && !out.failed(); ++j)
    for (int k = 3; k <= 5 && !out.failed(); ++k) {
      int n = j + k - 2;
      auto ctx = EdgeContext::unrooted_over(n);
      LegMask left = leg_range(1, j - 1), right = leg_range(1, n) & ~left;
      std::vector<LegMask> vj, vk, merged;
      for (int l = 1; l <= n; ++l) {
        (l < j ? vj : vk).push_back(leg_bit(l));
        merged.push_back(leg_bit(l));
      }
      vj.push_back(right);
      vk.push_back(left);
      Symbol xe = Symbol::edge(ctx.canonical(left), true);
      auto T = f.free_vertex(vj, ctx, VertexForm::SubsetSum) * RationalFunction(Monomial(xe, -1), Scalar::i()) *
               f.free_vertex(vk, ctx, VertexForm::SubsetSum);
      auto merged_v = fo.free_vertex(merged, ctx, VertexForm::SubsetSum);
      out.expect_equal(n, "X_e coefficient of v_" + std::to_string(j) + " i/X_e v_" + std::to_string(k) + " + v_" +
                              std::to_string(n),
                       T.coefficient_of(xe, 1) + merged_v.coefficient_of(xe, 1), RationalFunction());
    }
}

} // namespace detail

inline Report check_generalized(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  detail::generalized_suite(out, c, TheorySpec::generalized(), max_n);
  r.notes.push_back("X_P for distinct subsets are treated as independent symbols");
  return r;
}

// beta_n sanity, then the generalized suite over a theory induced by a
// symbolic alpha_1.
inline Report check_nonlocal(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  RationalFunction msq(Symbol::mass_sq());

  NonlocalSpec id;
  id.alpha = {{0, RationalFunction(1)}};
  out.expect_equal(0, "identity transform beta_0", nonlocal_beta(0, id), -msq);
  out.expect_equal(1, "identity transform beta_1", nonlocal_beta(1, id), RationalFunction(1));
  for (int n = 2; n <= 4; ++n)
    out.expect_equal(n, "identity transform beta_" + std::to_string(n), nonlocal_beta(n, id), RationalFunction());

  NonlocalSpec one;
  RationalFunction a1(Symbol::nonlocal(1));
  one.alpha = {{0, RationalFunction(1)}, {1, a1}};
  std::vector<RationalFunction> want{-msq, RationalFunction(1) - RationalFunction(2) * a1 * msq,
                                     RationalFunction(2) * a1 - a1 * a1 * msq, a1 * a1, RationalFunction()};
  for (int n = 0; n < static_cast<int>(want.size()); ++n)
    out.expect_equal(n, "alpha_1 transform beta_" + std::to_string(n), nonlocal_beta(n, one),
                     want[static_cast<std::size_t>(n)]);

  TheorySpec induced = theory_from_nonlocal(one);
  if (!induced.is_generalized())
    out.fail(0, "induced theory propagator", "not generalized");
  detail::generalized_suite(out, c, induced, max_n);
  r.notes.push_back("identities are symbolic in X_P; beta enters only through kinematic evaluation");
  return r;
}

// Literal and subset-sum vertices agree on random conserving momenta; the
// 4-point conservation identity holds at every sample. The fault perturbs the
// subset-sum side.
inline Report check_kinematics(const CheckSpec& c)
{
  Report r = make_report(c);
  detail::Outcome out(r);
  int max_n = c.max_n ? c.max_n : default_max_n(c.name);
  std::mt19937_64 rng(c.seed);
  DiffeoSpec other = detail::perturbed(c.diffeo, c.fault);
  RationalFunction identity = parse_expression("x(1+2)+x(1+3)+x(1+4)-(x1+x2+x3+x4)-msq");
  std::uniform_int_distribution<long> num(-20, 20), den(1, 7);
  for (int n = 3; n <= max_n && !out.failed(); ++n) {
    auto lit = free_vertex(n, c.diffeo);
    auto sub = generalized_vertex(n, other, false);
    for (int t = 0; t < c.trials && !out.failed(); ++t) {
      EdgeValues ev;
      ev.mass_sq = Rational(num(rng), den(rng));
      ev.mass_sq.canonicalize();
      auto k = random_kinematics(leg_range(1, n), c.dim, rng);
      auto lv = evaluate_edges(lit, k, ev);
      out.expect_equal(n, "literal - subset-sum vertex at sample " + std::to_string(t), lv, evaluate_edges(sub, k, ev));
      if (!(evaluate_edges(lit, k, ev) == lv))
        out.fail(n, "repeated evaluation differs at sample " + std::to_string(t), lv.to_string());
      if (n == 4)
        out.expect_equal(n, "4-point conservation identity at sample " + std::to_string(t),
                         RationalFunction(evaluate_at_kinematics(identity, k, ev)), RationalFunction());
    }
  }
  return r;
}

inline Report run_check(const CheckSpec& c, bool timing = false)
{
  c.validate();
  auto t0 = std::chrono::steady_clock::now();
  Report r;
  if (c.name == "bn")
    r = check_bn(c);
  else if (c.name == "smatrix_free")
    r = check_smatrix_free(c);
  else if (c.name == "interaction")
    r = check_interaction_cancellation(c);
  else if (c.name == "bprime")
    r = check_bprime(c);
  else if (c.name == "adiabatic")
    r = check_adiabatic(c);
  else if (c.name == "generalized")
    r = check_generalized(c);
  else if (c.name == "nonlocal")
    r = check_nonlocal(c);
  else
    r = check_kinematics(c);
  if (timing)
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::vector<CheckSpec> default_suite()
{
  std::vector<CheckSpec> s;
  auto add = [&](std::string name, int sp = 3) {
    CheckSpec c;
    c.name = std::move(name);
    c.s = sp;
    s.push_back(c);
  };
  add("bn");
  add("smatrix_free");
  add("interaction", 3);
  add("interaction", 4);
  add("bprime", 3);
  add("adiabatic", 3);
  add("adiabatic", 4);
  add("generalized");
  add("nonlocal");
  add("kinematics");
  return s;
}

// Checks may run concurrently; reports keep the order of specs.
inline std::vector<Report> run_suite(const std::vector<CheckSpec>& specs, int jobs = 1, bool timing = false)
{
  for (auto& c : specs)
    c.validate();
  std::vector<Report> out(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < specs.size();) {
      try {
        out[i] = run_check(specs[i], timing);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int w = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k)
      pool.emplace_back(work);
    for (auto& t : pool)
      t.join();
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
  return out;
}

inline bool suite_passed(const std::vector<Report>& reports)
{
  return std::all_of(reports.begin(), reports.end(), [](auto& r) { return r.passed(); });
}

} // namespace fdiff
