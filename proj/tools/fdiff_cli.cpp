#include "fdiff/config.hpp"
#include "fdiff/report_io.hpp"
#include "fdiff/rule_dump.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace fdiff;

namespace {

struct Globals {
  std::string config_path;
  std::optional<int> max_n, s, order, jobs;
  std::optional<std::uint64_t> seed;
  std::string format;
  bool trace = false;
  bool timing = false;
};

RunConfig resolve(const Globals& g)
{
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.max_n)
    c.max_n = *g.max_n;
  if (g.s)
    c.s = *g.s;
  if (g.order)
    c.order = *g.order;
  if (g.jobs)
    c.jobs = *g.jobs;
  if (g.seed)
    c.seed = *g.seed;
  if (!g.format.empty())
    c.format = g.format;
  c.trace = c.trace || g.trace;
  c.timing = c.timing || g.timing;
  return c;
}

int interaction_power(const RunConfig& c)
{
  if (c.s)
    return *c.s;
  if (!c.theory.interactions.empty())
    return c.theory.interactions.front().s;
  return 3;
}

Interaction interaction_of(const TheorySpec& t, int s)
{
  for (auto& in : t.interactions)
    if (in.s == s)
      return in;
  return {s, RationalFunction(Symbol::coupling(s))};
}

// Theory with the requested interaction present.
TheorySpec with_interaction(TheorySpec t, int s)
{
  if (std::none_of(t.interactions.begin(), t.interactions.end(), [&](auto& in) { return in.s == s; }))
    t.interactions.push_back(interaction_of(t, s));
  return t;
}

std::string csv_escape(const std::string& s) { return detail::csv_field(s); }

int cmd_rules(const RunConfig& c, int n, const std::string& kind)
{
  if (n < 3 || n > 12)
    throw CLI::ValidationError("--n", "valence must lie in 3..12");
  TheorySpec theory = c.effective_theory();
  RationalFunction v;
  std::string theory_name = theory.name();
  if (kind == "free") {
    v = free_vertex(n, c.diffeo, theory.mass_sq);
    theory_name = "standard";
  } else if (kind == "interaction") {
    auto in = interaction_of(theory, interaction_power(c));
    v = interaction_vertex(n, in.s, in.lambda, c.diffeo);
    theory_name = "phi" + std::to_string(in.s);
  } else if (kind == "total") {
    if (theory.is_generalized())
      throw Error("total vertex needs the standard propagator");
    if (c.s)
      theory = with_interaction(theory, *c.s);
    v = total_vertex(n, theory, c.diffeo);
    theory_name = theory.name();
  } else {
    v = generalized_vertex(n, c.diffeo, true);
    theory_name = "generalized";
  }
  auto j = rule_json(n, theory_name, kind, v);
  if (c.format == "json") {
    std::cout << j.dump(2) << "\n";
  } else if (c.format == "csv") {
    std::cout << "coefficient,edges\n";
    for (auto& t : j["terms"]) {
      std::string edges;
      for (auto& e : t["edges"])
        edges += (edges.empty() ? "" : " ") + e.get<std::string>();
      std::cout << csv_escape(t["coefficient"].get<std::string>()) << "," << csv_escape(edges) << "\n";
    }
  } else {
    std::cout << j["value"].get<std::string>() << "\n";
  }
  return 0;
}

LegMask parse_offshell(const std::string& spec, int n)
{
  if (spec.empty() || spec == "none")
    return 0;
  if (spec == "all")
    return leg_range(1, n);
  LegMask m = 0;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t pos = 0;
    int leg = 0;
    try {
      leg = std::stoi(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size() || leg < 1 || leg > n)
      throw CLI::ValidationError("--offshell", "'" + item + "' is not a leg in 1.." + std::to_string(n));
    m |= leg_bit(leg);
  }
  return m;
}

int cmd_treesum(const RunConfig& c, const std::string& kind, int n, const std::string& offshell,
                const std::string& mode)
{
  if (n < 1 || n > 9)
    throw CLI::ValidationError("--n", "tree size must lie in 1..9");
  if (!offshell.empty() && kind != "A")
    throw CLI::ValidationError("--offshell", "only amputated sums (--kind A) take offshell legs");
  if (mode != "s_only" && kind != "bprime")
    throw CLI::ValidationError("--mode", "only --kind bprime takes a decoration mode");
  TreeSumOptions opt;
  opt.jobs = c.jobs;
  opt.trace = c.trace;
  TheorySpec theory = c.effective_theory();
  TreeSumResult r;
  int s = interaction_power(c);
  if (kind == "b") {
    r = tree_sum_b(n, c.diffeo, theory, opt);
  } else if (kind == "A") {
    if (n < 3)
      throw CLI::ValidationError("--n", "amputated sums need n >= 3");
    if (c.s)
      theory = with_interaction(theory, *c.s);
    r = tree_sum_A(n, parse_offshell(offshell, n), theory, c.diffeo, opt);
  } else if (kind == "bprime") {
    TheorySpec t = with_interaction(theory, s);
    r = tree_sum_bprime(n, s, c.diffeo, mode == "all" ? BPrimeMode::AllVertices : BPrimeMode::SOnly, opt, &t);
  } else {
    if (n < 3)
      throw CLI::ValidationError("--n", "S sums need n >= 3");
    TheorySpec t = with_interaction(theory, s);
    r = s_linear_tree_sum(n, s, c.diffeo, opt, &t);
  }

  ojson j;
  j["kind"] = r.kind;
  j["n"] = r.n;
  j["theory"] = r.theory;
  j["mode"] = r.mode;
  if (kind == "bprime" || kind == "S")
    j["s"] = s;
  if (kind == "A") {
    ojson legs = ojson::array();
    for (int k = 1; k <= n; ++k)
      if (r.offshell & leg_bit(k))
        legs.push_back(k);
    j["offshell"] = legs;
  }
  j["value"] = r.value.to_string();
  j["tree_count"] = r.tree_count;
  j["decorated_count"] = r.decorated_count;
  if (kind == "S") {
    ojson bv = ojson::object();
    for (auto& [k, v] : r.by_valence)
      bv[std::to_string(k)] = v.to_string();
    j["by_valence"] = bv;
  }
  if (c.trace) {
    j["trace"] = ojson::array();
    for (auto& t : r.trace)
      j["trace"].push_back(
          {{"topology", t.topology}, {"decoration", t.decoration}, {"amplitude", t.amplitude.to_string()}});
  }

  if (c.format == "json") {
    std::cout << j.dump(2) << "\n";
  } else if (c.format == "csv") {
    std::cout << "kind,n,value,tree_count,decorated_count\n"
              << r.kind << "," << r.n << "," << csv_escape(j["value"].get<std::string>()) << "," << r.tree_count
              << "," << r.decorated_count << "\n";
    if (c.trace) {
      std::cout << "topology,decoration,amplitude\n";
      for (auto& t : r.trace)
        std::cout << csv_escape(t.topology) << "," << csv_escape(t.decoration) << ","
                  << csv_escape(t.amplitude.to_string()) << "\n";
    }
  } else {
    std::cout << r.kind << "_" << n << " = " << r.value.to_string() << "\n"
              << "trees: " << r.tree_count << ", decorated: " << r.decorated_count << "\n";
    for (auto& [k, v] : r.by_valence)
      std::cout << "  valence " << k << ": " << v.to_string() << "\n";
    for (auto& t : r.trace)
      std::cout << "  " << t.topology << " [" << t.decoration << "] " << t.amplitude.to_string() << "\n";
  }
  return 0;
}

Fault parse_fault(const std::string& text)
{
  // j or j:delta
  Fault f;
  auto colon = text.find(':');
  std::string idx = text.substr(0, colon);
  std::size_t pos = 0;
  try {
    f.coefficient = std::stoi(idx, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != idx.size())
    throw CLI::ValidationError("--fault", "expected j or j:p/q");
  if (colon != std::string::npos)
    f.delta = parse_rational(text.substr(colon + 1));
  return f;
}

int cmd_verify(RunConfig c, const std::vector<std::string>& checks, const std::string& fault)
{
  if (!checks.empty())
    c.checks = checks;
  if (!fault.empty())
    c.fault = parse_fault(fault);
  for (auto& name : c.checks) {
    auto& k = known_checks();
    if (std::find(k.begin(), k.end(), name) == k.end())
      throw CLI::ValidationError("--check", "unknown check '" + name + "'");
  }
  c.validate_suite();
  auto reports = run_suite(c.specs(), c.jobs, c.timing);
  if (c.format == "json")
    std::cout << to_json(reports).dump(2) << "\n";
  else if (c.format == "csv")
    std::cout << to_csv(reports, c.timing);
  else
    std::cout << to_pretty(reports);
  return suite_passed(reports) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Feynman rules and tree sums of field diffeomorphisms in exact arithmetic"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--max-n", g.max_n, "largest n for verification checks");
  app.add_option("--s", g.s, "interaction power");
  app.add_option("--order", g.order, "power series truncation order");
  app.add_option("--seed", g.seed, "seed for randomized kinematics");
  app.add_option("--jobs", g.jobs, "worker threads");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "csv", "pretty"}));
  app.add_flag("--trace", g.trace, "per-tree dump for tree sums");
  app.add_flag("--timing", g.timing, "include wall-clock times in reports");

  auto* rules = app.add_subcommand("rules", "print a vertex");
  int rules_n = 3;
  std::string rules_kind = "free";
  rules->add_option("--n", rules_n, "valence")->required();
  rules->add_option("--kind", rules_kind, "vertex kind")
      ->check(CLI::IsMember({"free", "interaction", "total", "generalized"}));

  auto* treesum = app.add_subcommand("treesum", "evaluate a tree sum");
  int tree_n = 2;
  std::string tree_kind = "b", offshell, mode = "s_only";
  treesum->add_option("--kind", tree_kind, "sum kind")->check(CLI::IsMember({"b", "bprime", "A", "S"}));
  treesum->add_option("--n", tree_n, "number of leaves or legs")->required();
  treesum->add_option("--offshell", offshell, "offshell legs for A: all, none or a list like 1,3");
  treesum->add_option("--mode", mode, "bprime decorations")->check(CLI::IsMember({"all", "s_only"}));

  auto* verify = app.add_subcommand("verify", "run verification checks");
  std::vector<std::string> checks;
  std::string fault;
  verify->add_option("--check", checks, "check to run (repeatable); default is the full suite");
  verify->add_option("--fault", fault, "perturb a_j by delta on the oracle side: j or j:p/q");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  try {
    RunConfig c = resolve(g);
    c.validate();
    if (*rules)
      return cmd_rules(c, rules_n, rules_kind);
    if (*treesum)
      return cmd_treesum(c, tree_kind, tree_n, offshell, mode);
    return cmd_verify(c, checks, fault);
  } catch (const CLI::Error& e) {
    std::cerr << "fdiff: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fdiff: " << e.what() << "\n";
    return 2;
  }
}
