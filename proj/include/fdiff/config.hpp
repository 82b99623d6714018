#pragma once

#include "fdiff/verifier.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace fdiff {

struct RunConfig {
  TheorySpec theory;
  std::optional<NonlocalSpec> nonlocal;
  DiffeoSpec diffeo = DiffeoSpec::symbolic_spec();

  std::vector<std::string> checks; // empty: default suite
  int max_n = 0;
  std::optional<int> s;
  int order = 10;
  int trials = 50;
  std::uint64_t seed = 1;
  int dim = 4;
  std::optional<Fault> fault;
  int jobs = 1;

  std::string format = "json";
  bool trace = false;
  bool timing = false;

  // Theory seen by the rules and treesum commands.
  TheorySpec effective_theory() const
  {
    if (!nonlocal)
      return theory;
    TheorySpec t = theory_from_nonlocal(*nonlocal);
    t.interactions = theory.interactions;
    return t;
  }

  void validate() const
  {
    theory.validate();
    diffeo.validate();
    if (s && *s < 3)
      throw Error("interaction power must be >= 3");
    if (format != "json" && format != "csv" && format != "pretty")
      throw Error("format must be json, csv or pretty");
    if (jobs < 1)
      throw Error("jobs must be positive");
  }

  void validate_suite() const
  {
    validate();
    for (auto& c : specs())
      c.validate();
  }

  std::vector<CheckSpec> specs() const
  {
    std::vector<CheckSpec> out;
    if (checks.empty()) {
      out = default_suite();
    } else {
      for (auto& name : checks) {
        CheckSpec c;
        c.name = name;
        out.push_back(c);
      }
    }
    for (auto& c : out) {
      c.max_n = max_n;
      if (s)
        c.s = *s;
      c.order = order;
      c.trials = trials;
      c.seed = seed;
      c.dim = dim;
      c.jobs = jobs;
      c.diffeo = diffeo;
      c.fault = fault;
    }
    // An explicit s collapses the two default interaction/adiabatic entries.
    std::vector<CheckSpec> unique;
    std::set<std::pair<std::string, int>> seen;
    for (auto& c : out)
      if (seen.insert({c.name, c.s}).second)
        unique.push_back(c);
    return unique;
  }
};

namespace detail {

using json = nlohmann::json;

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys)
{
  if (!j.is_object())
    throw Error(where + " must be an object");
  for (auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw Error("unknown key '" + k + "' in " + where);
}

// Integers, "p/q" strings and symbolic expressions ("a1", "-2*lambda3").
inline RationalFunction exact_value(const json& v, const std::string& where)
{
  if (v.is_number_integer())
    return RationalFunction(Rational(v.get<long>()));
  if (v.is_string()) {
    try {
      return parse_expression(v.get<std::string>());
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  if (v.is_number_float())
    throw Error(where + ": floating-point literals are not accepted, write \"p/q\"");
  throw Error(where + ": expected an integer or a string");
}

inline int int_value(const json& v, const std::string& where)
{
  if (!v.is_number_integer())
    throw Error(where + " must be an integer");
  return v.get<int>();
}

inline bool bool_value(const json& v, const std::string& where)
{
  if (!v.is_boolean())
    throw Error(where + " must be true or false");
  return v.get<bool>();
}

inline int index_key(const std::string& k, const std::string& where)
{
  std::size_t pos = 0;
  int n = -1;
  try {
    n = std::stoi(k, &pos);
  } catch (const std::exception&) {
  }
  if (n < 0 || pos != k.size())
    throw Error(where + ": key '" + k + "' is not a nonnegative index");
  return n;
}

inline std::map<int, RationalFunction> indexed_values(const json& j, const std::string& where)
{
  if (!j.is_object())
    throw Error(where + " must map indices to values");
  std::map<int, RationalFunction> m;
  for (auto& [k, v] : j.items()) {
    int idx = index_key(k, where);
    m[idx] = exact_value(v, where + "[" + k + "]");
  }
  return m;
}

inline void read_theory(const json& j, RunConfig& c)
{
  only_keys(j, "theory", {"propagator", "mass_sq", "beta", "interactions", "nonlocal"});
  if (j.contains("propagator")) {
    auto p = j["propagator"];
    if (p == "standard")
      c.theory.propagator = TheorySpec::Propagator::Standard;
    else if (p == "generalized")
      c.theory.propagator = TheorySpec::Propagator::Generalized;
    else
      throw Error("theory.propagator must be \"standard\" or \"generalized\"");
  }
  if (j.contains("mass_sq"))
    c.theory.mass_sq = exact_value(j["mass_sq"], "theory.mass_sq");
  if (j.contains("beta"))
    c.theory.beta = indexed_values(j["beta"], "theory.beta");
  if (j.contains("interactions")) {
    if (!j["interactions"].is_array())
      throw Error("theory.interactions must be an array");
    for (auto& in : j["interactions"]) {
      Interaction x;
      if (in.is_number_integer()) {
        x.s = in.get<int>();
      } else {
        only_keys(in, "theory.interactions[]", {"s", "lambda"});
        if (!in.contains("s"))
          throw Error("theory.interactions[] needs s");
        x.s = int_value(in["s"], "theory.interactions[].s");
      }
      if (x.s < 3)
        throw Error("interaction power " + std::to_string(x.s) + " is below 3");
      x.lambda = in.is_object() && in.contains("lambda") ? exact_value(in["lambda"], "theory.interactions[].lambda")
                                                         : RationalFunction(Symbol::coupling(x.s));
      c.theory.interactions.push_back(x);
    }
  }
  if (j.contains("nonlocal")) {
    auto& nl = j["nonlocal"];
    only_keys(nl, "theory.nonlocal", {"alpha"});
    NonlocalSpec spec;
    spec.mass_sq = c.theory.mass_sq;
    if (nl.contains("alpha"))
      spec.alpha = indexed_values(nl["alpha"], "theory.nonlocal.alpha");
    if (spec.coeff(0) != RationalFunction(1))
      throw Error("theory.nonlocal.alpha must have alpha0 = 1");
    c.nonlocal = spec;
  }
}

inline void read_diffeo(const json& j, RunConfig& c)
{
  only_keys(j, "diffeo", {"symbolic", "max_order", "a"});
  if (j.contains("symbolic"))
    c.diffeo.symbolic = bool_value(j["symbolic"], "diffeo.symbolic");
  if (j.contains("max_order"))
    c.diffeo.max_order = int_value(j["max_order"], "diffeo.max_order");
  if (j.contains("a"))
    c.diffeo.a = indexed_values(j["a"], "diffeo.a");
  auto it = c.diffeo.a.find(0);
  if (it != c.diffeo.a.end() && it->second != RationalFunction(1))
    throw Error("diffeo.a[0] must be 1");
}

inline void read_suite(const json& j, RunConfig& c)
{
  only_keys(j, "suite", {"checks", "max_n", "s", "order", "trials", "seed", "dim", "fault", "jobs"});
  if (j.contains("checks")) {
    if (!j["checks"].is_array())
      throw Error("suite.checks must be an array of names");
    for (auto& n : j["checks"]) {
      if (!n.is_string())
        throw Error("suite.checks must be an array of names");
      c.checks.push_back(n.get<std::string>());
    }
  }
  if (j.contains("max_n"))
    c.max_n = int_value(j["max_n"], "suite.max_n");
  if (j.contains("s"))
    c.s = int_value(j["s"], "suite.s");
  if (j.contains("order"))
    c.order = int_value(j["order"], "suite.order");
  if (j.contains("trials"))
    c.trials = int_value(j["trials"], "suite.trials");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw Error("suite.seed must be a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("dim"))
    c.dim = int_value(j["dim"], "suite.dim");
  if (j.contains("jobs"))
    c.jobs = int_value(j["jobs"], "suite.jobs");
  if (j.contains("fault")) {
    auto& f = j["fault"];
    only_keys(f, "suite.fault", {"coefficient", "delta"});
    Fault fault;
    if (f.contains("coefficient"))
      fault.coefficient = int_value(f["coefficient"], "suite.fault.coefficient");
    if (f.contains("delta")) {
      auto d = exact_value(f["delta"], "suite.fault.delta");
      if (!d.is_constant() || !d.constant_value().is_real())
        throw Error("suite.fault.delta must be a rational number");
      fault.delta = d.constant_value().re();
    }
    c.fault = fault;
  }
}

inline void read_output(const json& j, RunConfig& c)
{
  only_keys(j, "output", {"format", "trace", "timing"});
  if (j.contains("format")) {
    if (!j["format"].is_string())
      throw Error("output.format must be a string");
    c.format = j["format"].get<std::string>();
  }
  if (j.contains("trace"))
    c.trace = bool_value(j["trace"], "output.trace");
  if (j.contains("timing"))
    c.timing = bool_value(j["timing"], "output.timing");
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j)
{
  detail::only_keys(j, "config", {"theory", "diffeo", "suite", "output"});
  RunConfig c;
  if (j.contains("theory"))
    detail::read_theory(j["theory"], c);
  if (j.contains("diffeo"))
    detail::read_diffeo(j["diffeo"], c);
  if (j.contains("suite"))
    detail::read_suite(j["suite"], c);
  if (j.contains("output"))
    detail::read_output(j["output"], c);
  return c;
}

inline RunConfig config_from_string(const std::string& text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return config_from_string(text);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

} // namespace fdiff
