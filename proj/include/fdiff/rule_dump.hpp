#pragma once

#include "fdiff/feynman_rules.hpp"

#include <json.hpp>

namespace fdiff {

// A vertex split by its edge-variable content: value = sum coefficient * edges.
struct EdgeTerm {
  Monomial edges; // product of edge variables, one for the constant part
  RationalFunction coefficient;
};

inline std::vector<EdgeTerm> split_by_edges(const RationalFunction& v)
{
  std::vector<EdgeTerm> out;
  for (auto& [m, c] : v.terms()) {
    std::vector<Monomial::Factor> e, rest;
    for (auto& f : m.factors())
      (f.first.is_edge() ? e : rest).push_back(f);
    Monomial em(e);
    RationalFunction part(Monomial(rest), c);
    auto it = std::find_if(out.begin(), out.end(), [&](auto& t) { return t.edges == em; });
    if (it == out.end())
      out.push_back({em, part});
    else
      it->coefficient += part;
  }
  std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.edges.is_one() && !b.edges.is_one(); });
  return out;
}

namespace detail {

inline std::string factor_prefix(const RationalFunction& c)
{
  if (c == RationalFunction(1))
    return "";
  if (c == RationalFunction(-1))
    return "-";
  if (c.is_monomial())
    return c.to_string() + "*";
  bool imaginary = std::all_of(c.terms().begin(), c.terms().end(), [](auto& t) { return t.second.is_imaginary(); });
  if (imaginary)
    return "i*(" + (c * RationalFunction(-Scalar::i())).to_string() + ")*";
  return "(" + c.to_string() + ")*";
}

} // namespace detail

// Edge terms sharing a coefficient are collected: 2*i*a1*(x1+x2+x3).
inline std::string grouped_string(const RationalFunction& v)
{
  auto terms = split_by_edges(v);
  if (terms.empty())
    return "0";
  std::vector<std::pair<RationalFunction, std::vector<Monomial>>> groups;
  std::string out;
  auto append = [&](const std::string& piece) {
    if (!out.empty() && piece.front() != '-')
      out += "+";
    out += piece;
  };
  for (auto& t : terms) {
    if (t.edges.is_one()) {
      append(t.coefficient.to_string());
      continue;
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](auto& g) { return g.first == t.coefficient; });
    if (it == groups.end())
      groups.push_back({t.coefficient, {t.edges}});
    else
      it->second.push_back(t.edges);
  }
  for (auto& [c, edges] : groups) {
    std::string sum;
    for (auto& e : edges)
      sum += (sum.empty() ? "" : "+") + e.to_string();
    if (edges.size() > 1)
      sum = "(" + sum + ")";
    append(detail::factor_prefix(c) + sum);
  }
  return out;
}

inline nlohmann::ordered_json rule_json(int n, const std::string& theory, const std::string& kind,
                                        const RationalFunction& v)
{
  nlohmann::ordered_json j;
  j["valence"] = n;
  j["theory"] = theory;
  j["kind"] = kind;
  j["value"] = grouped_string(v);
  j["terms"] = nlohmann::ordered_json::array();
  for (auto& t : split_by_edges(v)) {
    nlohmann::ordered_json e = nlohmann::ordered_json::array();
    for (auto& [s, p] : t.edges.factors())
      for (int k = 0; k < p; ++k)
        e.push_back(s.name());
    j["terms"].push_back({{"coefficient", t.coefficient.to_string()}, {"edges", e}});
  }
  if (kind == "free" || kind == "total")
    j["mass_term"] = "sign of the m^2 term fixed so that iv_4 = 4*i*msq*a1^2+...; g_n = n*f_n - c_{n-2}";
  return j;
}

} // namespace fdiff
