#pragma once

#include "fdiff/tree.hpp"

#include <thread>

namespace fdiff {

enum class DecorationMode {
  FreeOnly,    // diffeomorphism vertices only
  AllVertices, // every vertex: free + all interaction vertices w_n^{(s)} with n >= s
  SOnly,       // interaction only on s-valent vertices; edges touching them are cut
  LinearIn,    // exactly one interaction vertex (valence >= s), all others free
};

inline std::string to_string(DecorationMode m)
{
  switch (m) {
  case DecorationMode::FreeOnly: return "free";
  case DecorationMode::AllVertices: return "all_vertices";
  case DecorationMode::SOnly: return "s_only";
  case DecorationMode::LinearIn: return "linear";
  }
  return "?";
}

struct TreeSumOptions {
  VertexForm form = VertexForm::SubsetSum;
  DecorationMode mode = DecorationMode::FreeOnly;
  int s = 0; // interaction power for SOnly / LinearIn
  bool onshell_after_assembly = false;
  bool include_root_propagator = true;
  int jobs = 1;
  bool trace = false;
  std::size_t trace_limit = 20000;
};

struct TraceEntry {
  std::string topology;
  std::string decoration;
  RationalFunction amplitude;
};

struct TreeSumResult {
  RationalFunction value;
  long long tree_count = 0;
  long long decorated_count = 0;
  int n = 0;
  LegMask offshell = 0;
  std::string kind;
  std::string theory;
  std::string mode;
  // LinearIn only: contribution by valence of the interaction vertex.
  std::map<int, RationalFunction> by_valence;
  std::vector<TraceEntry> trace;
};

// Evaluates trees of one context (rooted or unrooted over fixed legs).
// Per-topology values are summed over all admissible decorations by
// distributing the decoration choice over the vertices.
class TreeEvaluator {
public:
  // One slot per possible valence of the single interaction vertex, plus slot 0.
  static int grade_count(const EdgeContext& ctx, const TreeSumOptions& opt)
  {
    return opt.mode == DecorationMode::LinearIn ? leg_count(ctx.universe) + 2 : 1;
  }

  TreeEvaluator(VertexFactory& factory, EdgeContext ctx, bool rooted, LegMask onshell, const TreeSumOptions& opt)
      : f_(factory), ctx_(ctx), rooted_(rooted), opt_(opt)
  {
    for (int j = 1; j <= max_leg_label; ++j)
      if (onshell & leg_bit(j))
        onshell_.push_back(leg_bit(j));
    if (!opt_.onshell_after_assembly)
      base_zeros_ = onshell_;
    if (opt_.mode == DecorationMode::SOnly || opt_.mode == DecorationMode::LinearIn) {
      auto& ins = f_.theory().interactions;
      auto it = std::find_if(ins.begin(), ins.end(), [&](auto& in) { return in.s == opt_.s; });
      if (it == ins.end())
        throw Error("theory has no interaction of power " + std::to_string(opt_.s));
      selected_ = *it;
    }
    grades_ = grade_count(ctx_, opt_);
  }

  // Allowed vertex types at valence d: 0 = free, s = interaction of power s.
  std::vector<int> allowed(int d) const
  {
    std::vector<int> t{0};
    switch (opt_.mode) {
    case DecorationMode::FreeOnly: break;
    case DecorationMode::AllVertices:
      for (auto& in : f_.theory().interactions)
        if (d >= in.s)
          t.push_back(in.s);
      break;
    case DecorationMode::SOnly:
      if (d == selected_.s)
        t.push_back(selected_.s);
      break;
    case DecorationMode::LinearIn:
      if (d >= selected_.s)
        t.push_back(selected_.s);
      break;
    }
    return t;
  }

  long long decoration_count(const TreeTopology& t) const
  {
    long long prod = 1, lin = 0;
    for (auto& [v, p] : t.internal_vertices()) {
      auto a = static_cast<long long>(allowed(v->valence()).size());
      prod *= a;
      lin += a - 1;
    }
    return opt_.mode == DecorationMode::LinearIn ? lin : prod;
  }

  // Graded tree value; grade 0 only unless LinearIn, where grade k is the
  // part with one interaction vertex of valence k.
  std::vector<RationalFunction> tree_value_graded(const TreeTopology& t)
  {
    if (t.root->is_leaf())
      return {RationalFunction(1)};
    Graded total(static_cast<std::size_t>(grades_));
    for (int ty : allowed(t.root->valence()))
      add_into(total, value(*t.root, ty, false));
    RationalFunction prop = root_propagator(t);
    for (auto& g : total) {
      if (!prop.is_zero() && !g.is_zero())
        g = g * prop;
      if (opt_.onshell_after_assembly)
        g = zero_onshell(g, t);
    }
    return total;
  }

  RationalFunction tree_value(const TreeTopology& t)
  {
    auto g = tree_value_graded(t);
    if (opt_.mode != DecorationMode::LinearIn)
      return g[0];
    RationalFunction sum;
    for (std::size_t k = 1; k < g.size(); ++k)
      sum += g[k];
    return sum;
  }

  // Amplitude of one decorated tree. types[i] is the type of the i-th
  // internal vertex in preorder.
  RationalFunction amplitude(const TreeTopology& t, const std::vector<int>& types)
  {
    if (t.root->is_leaf())
      return RationalFunction(1);
    auto verts = t.internal_vertices();
    if (types.size() != verts.size())
      throw Error("decoration size does not match the tree");
    std::unordered_map<const TreeNode*, int> type_of;
    for (std::size_t i = 0; i < verts.size(); ++i) {
      auto allow = allowed(verts[i].first->valence());
      if (std::find(allow.begin(), allow.end(), types[i]) == allow.end())
        throw Error("vertex type " + std::to_string(types[i]) + " not allowed at valence " +
                    std::to_string(verts[i].first->valence()));
      type_of[verts[i].first] = types[i];
    }
    bool cut = opt_.mode == DecorationMode::SOnly;
    RationalFunction amp = root_propagator(t);
    if (amp.is_zero())
      amp = RationalFunction(1);
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const TreeNode& v = *verts[i].first;
      int parent = verts[i].second;
      RationalFunction factor;
      if (types[i] == 0) {
        auto zeros = base_zeros_;
        if (cut) {
          if (parent >= 0 && types[static_cast<std::size_t>(parent)] != 0)
            zeros.push_back(ctx_.canonical(ctx_.universe ^ v.mask));
          for (auto& c : v.children)
            if (!c->is_leaf() && type_of[c.get()] != 0)
              zeros.push_back(ctx_.canonical(c->mask));
        }
        factor = f_.free_vertex(adjacent(v), ctx_, opt_.form, zeros);
      } else {
        factor = f_.interaction(v.valence(), interaction_of(types[i]));
      }
      amp = amp * factor;
      if (parent >= 0)
        amp = amp * internal_propagator(v);
    }
    if (opt_.onshell_after_assembly)
      amp = zero_onshell(amp, t);
    return amp;
  }

  // Every admissible decoration of t, in lexicographic order of types.
  std::vector<std::vector<int>> decorations(const TreeTopology& t) const
  {
    auto verts = t.internal_vertices();
    std::vector<std::vector<int>> options;
    for (auto& [v, p] : verts)
      options.push_back(allowed(v->valence()));
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int interactions) {
      if (i == options.size()) {
        if (opt_.mode != DecorationMode::LinearIn || interactions == 1)
          out.push_back(cur);
        return;
      }
      for (int ty : options[i]) {
        if (opt_.mode == DecorationMode::LinearIn && ty != 0 && interactions >= 1)
          continue;
        cur.push_back(ty);
        rec(i + 1, interactions + (ty != 0));
        cur.pop_back();
      }
    };
    rec(0, 0);
    return out;
  }

private:
  using Graded = std::vector<RationalFunction>;

  static void add_into(Graded& acc, const Graded& x)
  {
    for (std::size_t k = 0; k < acc.size(); ++k)
      if (!x[k].is_zero())
        acc[k] += x[k];
  }

  Graded mul(const Graded& a, const Graded& b) const
  {
    Graded r(a.size());
    if (a.size() == 1) {
      r[0] = a[0] * b[0];
      return r;
    }
    if (!a[0].is_zero() && !b[0].is_zero())
      r[0] = a[0] * b[0];
    for (std::size_t k = 1; k < a.size(); ++k) {
      if (!a[0].is_zero() && !b[k].is_zero())
        r[k] += a[0] * b[k];
      if (!a[k].is_zero() && !b[0].is_zero())
        r[k] += a[k] * b[0];
    }
    return r;
  }

  Graded scalar_graded(RationalFunction v, int grade = 0) const
  {
    Graded g(static_cast<std::size_t>(grades_));
    g[static_cast<std::size_t>(grade)] = std::move(v);
    return g;
  }

  const Interaction& interaction_of(int s) const
  {
    if (opt_.mode != DecorationMode::AllVertices)
      return selected_;
    for (auto& in : f_.theory().interactions)
      if (in.s == s)
        return in;
    throw Error("unknown interaction power");
  }

  std::vector<LegMask> adjacent(const TreeNode& v) const
  {
    std::vector<LegMask> adj;
    adj.reserve(v.children.size() + 1);
    for (auto& c : v.children)
      adj.push_back(c->mask);
    adj.push_back(ctx_.universe ^ v.mask);
    return adj;
  }

  RationalFunction internal_propagator(const TreeNode& v) const
  {
    return RationalFunction(Monomial(Symbol::edge(ctx_.canonical(v.mask), f_.theory().is_generalized()), -1),
                            Scalar::i());
  }

  RationalFunction root_propagator(const TreeTopology& t) const
  {
    if (!rooted_ || !opt_.include_root_propagator)
      return {};
    return internal_propagator(*t.root);
  }

  RationalFunction zero_onshell(const RationalFunction& r, const TreeTopology&) const
  {
    std::vector<Symbol> zs;
    for (auto m : onshell_)
      zs.push_back(Symbol::edge(m, f_.theory().is_generalized()));
    return r.set_zero(zs);
  }

  // Sum over decorations of the subtree below v with v of type ty; the parent
  // type only matters through the cut rule.
  const Graded& value(const TreeNode& v, int ty, bool parent_interacts)
  {
    bool cut = opt_.mode == DecorationMode::SOnly;
    if (!cut)
      parent_interacts = false;
    auto key = std::make_tuple(&v, ty, parent_interacts);
    auto it = memo_.find(key);
    if (it != memo_.end())
      return it->second;

    Graded result(static_cast<std::size_t>(grades_));
    int grade = 0;
    if (ty != 0 && opt_.mode == DecorationMode::LinearIn)
      grade = v.valence();

    // Child contributions per child type, each including the child propagator.
    std::vector<std::vector<std::pair<int, Graded>>> child_opts;
    for (auto& c : v.children) {
      std::vector<std::pair<int, Graded>> opts;
      if (c->is_leaf()) {
        opts.emplace_back(0, scalar_graded(RationalFunction(1)));
      } else {
        RationalFunction prop = internal_propagator(*c);
        for (int cty : allowed(c->valence())) {
          Graded g = value(*c, cty, ty != 0);
          if (std::all_of(g.begin(), g.end(), [](auto& x) { return x.is_zero(); }))
            continue;
          for (auto& x : g)
            if (!x.is_zero())
              x = x * prop;
          opts.emplace_back(cty, std::move(g));
        }
      }
      child_opts.push_back(std::move(opts));
    }

    if (cut && ty == 0) {
      // The free vertex depends on which neighbours are interaction vertices.
      std::vector<std::size_t> pick(child_opts.size(), 0);
      bool empty = std::any_of(child_opts.begin(), child_opts.end(), [](auto& o) { return o.empty(); });
      while (!empty) {
        auto zeros = base_zeros_;
        if (parent_interacts)
          zeros.push_back(ctx_.canonical(ctx_.universe ^ v.mask));
        for (std::size_t j = 0; j < child_opts.size(); ++j)
          if (child_opts[j][pick[j]].first != 0)
            zeros.push_back(ctx_.canonical(v.children[j]->mask));
        Graded prod = scalar_graded(f_.free_vertex(adjacent(v), ctx_, opt_.form, zeros));
        for (std::size_t j = 0; j < child_opts.size(); ++j)
          prod = mul(prod, child_opts[j][pick[j]].second);
        add_into(result, prod);
        std::size_t j = 0;
        while (j < pick.size() && ++pick[j] == child_opts[j].size())
          pick[j++] = 0;
        if (j == pick.size())
          break;
      }
    } else {
      RationalFunction factor;
      if (ty == 0) {
        auto zeros = base_zeros_;
        if (parent_interacts)
          zeros.push_back(ctx_.canonical(ctx_.universe ^ v.mask));
        factor = f_.free_vertex(adjacent(v), ctx_, opt_.form, zeros);
      } else {
        factor = f_.interaction(v.valence(), interaction_of(ty));
      }
      Graded prod = scalar_graded(std::move(factor), grade);
      for (auto& opts : child_opts) {
        Graded sum(static_cast<std::size_t>(grades_));
        for (auto& [cty, g] : opts)
          add_into(sum, g);
        prod = mul(prod, sum);
      }
      result = std::move(prod);
    }
    return memo_.emplace(key, std::move(result)).first->second;
  }

  struct KeyHash {
    std::size_t operator()(const std::tuple<const TreeNode*, int, bool>& k) const
    {
      return std::hash<const void*>{}(std::get<0>(k)) * 31 + static_cast<std::size_t>(std::get<1>(k)) * 2 +
             (std::get<2>(k) ? 1 : 0);
    }
  };

  VertexFactory& f_;
  EdgeContext ctx_;
  bool rooted_;
  TreeSumOptions opt_;
  std::vector<LegMask> onshell_;
  std::vector<LegMask> base_zeros_;
  Interaction selected_;
  int grades_ = 1;
  std::unordered_map<std::tuple<const TreeNode*, int, bool>, Graded, KeyHash> memo_;
};

inline std::string decoration_string(const std::vector<int>& types)
{
  std::string out;
  for (int t : types) {
    if (!out.empty())
      out += ",";
    out += t == 0 ? "F" : "W" + std::to_string(t);
  }
  return out;
}

// Sums tree values over all topologies of the given context.
inline TreeSumResult run_tree_sum(int n, bool rooted, LegMask offshell, VertexFactory& factory,
                                  const TreeSumOptions& opt)
{
  TreeSumResult res;
  res.n = n;
  res.offshell = offshell;
  res.theory = factory.theory().name();
  res.mode = to_string(opt.mode);
  auto trees = enumerate_trees(n, rooted);
  res.tree_count = static_cast<long long>(trees.size());
  EdgeContext ctx = trees.front().context;
  LegMask legs = leg_range(1, n);
  if ((offshell & ~legs) != 0)
    throw Error("offshell legs outside 1.." + std::to_string(n));
  LegMask onshell = legs & ~offshell;

  int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(trees.size())));
  int grades = TreeEvaluator::grade_count(ctx, opt);
  std::vector<std::vector<Accumulator>> partial(static_cast<std::size_t>(jobs),
                                                std::vector<Accumulator>(static_cast<std::size_t>(grades)));
  std::vector<long long> decorated(static_cast<std::size_t>(jobs), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  auto work = [&](int w) {
    try {
      TreeEvaluator ev(factory, ctx, rooted, onshell, opt);
      for (std::size_t i = static_cast<std::size_t>(w); i < trees.size(); i += static_cast<std::size_t>(jobs)) {
        auto g = ev.tree_value_graded(trees[i]);
        for (std::size_t k = 0; k < g.size(); ++k)
          partial[static_cast<std::size_t>(w)][k].add(g[k]);
        decorated[static_cast<std::size_t>(w)] += ev.decoration_count(trees[i]);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back(work, w);
    for (auto& th : pool)
      th.join();
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
  for (int k = 0; k < grades; ++k) {
    Accumulator acc;
    for (auto& p : partial)
      acc.merge(p[static_cast<std::size_t>(k)]);
    RationalFunction v = acc.result();
    if (opt.mode == DecorationMode::LinearIn) {
      if (k > 0 && !v.is_zero())
        res.by_valence[k] = v;
      if (k > 0)
        res.value += v;
    } else {
      res.value = v;
    }
  }
  for (auto d : decorated)
    res.decorated_count += d;

  if (opt.trace) {
    TreeEvaluator ev(factory, ctx, rooted, onshell, opt);
    for (auto& t : trees) {
      for (auto& deco : ev.decorations(t)) {
        if (res.trace.size() >= opt.trace_limit)
          break;
        res.trace.push_back({t.encoding(), decoration_string(deco), ev.amplitude(t, deco)});
      }
    }
  }
  return res;
}

// b_n: rooted, all n leaves onshell, root propagator included.
inline TreeSumResult tree_sum_b(int n, const DiffeoSpec& d, const TheorySpec& theory = TheorySpec::free_standard(),
                                TreeSumOptions opt = {})
{
  if (n < 1)
    throw Error("tree_sum_b needs n >= 1");
  opt.mode = DecorationMode::FreeOnly;
  VertexFactory f(theory, d);
  auto r = run_tree_sum(n, true, 0, f, opt);
  r.kind = "b";
  return r;
}

// Amputated sum with legs outside `offshell` onshell.
inline TreeSumResult tree_sum_A(int n, LegMask offshell, const TheorySpec& theory, const DiffeoSpec& d,
                                TreeSumOptions opt = {})
{
  if (n < 3)
    throw Error("tree_sum_A needs n >= 3");
  if (opt.mode == DecorationMode::FreeOnly && !theory.interactions.empty())
    opt.mode = DecorationMode::AllVertices;
  VertexFactory f(theory, d);
  auto r = run_tree_sum(n, false, offshell, f, opt);
  r.kind = "A";
  return r;
}

enum class BPrimeMode { AllVertices, SOnly };

inline TreeSumResult tree_sum_bprime(int n, int s, const DiffeoSpec& d, BPrimeMode mode, TreeSumOptions opt = {},
                                     const TheorySpec* theory = nullptr)
{
  if (n < 1)
    throw Error("tree_sum_bprime needs n >= 1");
  TheorySpec t = theory ? *theory : TheorySpec::phi_s(s);
  opt.mode = mode == BPrimeMode::AllVertices ? DecorationMode::AllVertices : DecorationMode::SOnly;
  opt.s = s;
  VertexFactory f(t, d);
  auto r = run_tree_sum(n, true, 0, f, opt);
  r.kind = "bprime";
  return r;
}

// S^{(s)}_n: amputated all-onshell sum linear in lambda_s; by_valence holds
// the split by the valence of the interaction vertex.
inline TreeSumResult s_linear_tree_sum(int n, int s, const DiffeoSpec& d, TreeSumOptions opt = {},
                                       const TheorySpec* theory = nullptr)
{
  if (n < 3)
    throw Error("s_linear_tree_sum needs n >= 3");
  TheorySpec t = theory ? *theory : TheorySpec::phi_s(s);
  opt.mode = DecorationMode::LinearIn;
  opt.s = s;
  VertexFactory f(t, d);
  auto r = run_tree_sum(n, false, 0, f, opt);
  r.kind = "S";
  return r;
}

// b_n from the root-vertex recursion: the root vertex joins k blocks carrying
// b_{|P_j|}, its subset sums run over Q(k+1, j) with onshell singletons set to zero.
inline TreeSumResult recursive_b(int n, const DiffeoSpec& d, TheorySpec::Propagator kind)
{
  if (n < 1)
    throw Error("recursive_b needs n >= 1");
  bool gen = kind == TheorySpec::Propagator::Generalized;
  TheorySpec theory = gen ? TheorySpec::generalized() : TheorySpec::free_standard();
  VertexFactory f(theory, d);
  std::vector<RationalFunction> b(static_cast<std::size_t>(n + 1));
  b[1] = RationalFunction(1);
  for (int m = 2; m <= n; ++m) {
    auto ctx = EdgeContext::rooted_over(m);
    std::vector<LegMask> zeros;
    for (int j = 1; j <= m; ++j)
      zeros.push_back(leg_bit(j));
    LegMask all = leg_range(1, m);
    Accumulator acc;
    for_each_mask_partition(all, [&](const std::vector<std::uint64_t>& blocks) {
      if (blocks.size() < 2)
        return;
      RationalFunction prod(1);
      for (auto blk : blocks)
        prod = prod * b[static_cast<std::size_t>(leg_count(blk))];
      if (prod.is_zero())
        return;
      std::vector<LegMask> adj(blocks.begin(), blocks.end());
      adj.push_back(ctx.universe ^ all);
      acc.add(f.free_vertex(adj, ctx, VertexForm::SubsetSum, zeros) * prod);
    });
    // i/X_S times the root vertex sum: -1/(2 X_S) times the bare subset sums.
    RationalFunction root = RationalFunction(Monomial(Symbol::edge(all, gen), -1), Scalar::i());
    b[static_cast<std::size_t>(m)] = acc.result() * root;
    if (!b[static_cast<std::size_t>(m)].is_constant() &&
        b[static_cast<std::size_t>(m)].contains_if([](Symbol s) { return s.is_edge(); }))
      throw Error("recursive b_" + std::to_string(m) + " is not free of edge variables: " +
                  b[static_cast<std::size_t>(m)].to_string());
  }
  TreeSumResult r;
  r.value = b[static_cast<std::size_t>(n)];
  r.n = n;
  r.kind = "recursive_b";
  r.theory = theory.name();
  r.mode = "recursion";
  return r;
}

// A^4_4 glued from tree sums b_2, b_3 and the three 2+2 channels. With a cubic
// interaction each 3-point block gains -i lambda_3.
inline RationalFunction glue_A44(const DiffeoSpec& d, const TheorySpec& theory)
{
  bool gen = theory.is_generalized();
  RationalFunction lambda;
  for (auto& in : theory.interactions) {
    if (in.s != 3)
      throw Error("glue_A44 supports only a cubic interaction");
    lambda = in.lambda;
  }
  RationalFunction b2 = recursive_b(2, d, theory.propagator).value;
  RationalFunction b3 = recursive_b(3, d, theory.propagator).value;
  auto ctx = EdgeContext::unrooted_over(4);
  auto x = [&](LegMask m) { return RationalFunction(Symbol::edge(ctx.canonical(m), gen)); };
  RationalFunction sumx;
  for (int j = 1; j <= 4; ++j)
    sumx += x(leg_bit(j));
  RationalFunction minus_i = RationalFunction(-Scalar::i());
  RationalFunction out = minus_i * b3 * sumx;
  for (int partner = 2; partner <= 4; ++partner) {
    LegMask left = leg_bit(1) | leg_bit(partner);
    LegMask right = leg_range(1, 4) & ~left;
    auto block = [&](LegMask m) {
      RationalFunction legs_sum;
      for (int j = 1; j <= 4; ++j)
        if (m & leg_bit(j))
          legs_sum += x(leg_bit(j));
      return minus_i * lambda + minus_i * b2 * legs_sum;
    };
    RationalFunction prop(Monomial(Symbol::edge(ctx.canonical(left), gen), -1), Scalar::i());
    out += block(left) * block(right) * prop;
  }
  return out;
}

} // namespace fdiff
