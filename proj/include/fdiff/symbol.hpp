#pragma once

#include "fdiff/scalar.hpp"

#include <bit>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fdiff {

// Declaration order is the global symbol order used for canonical printing.
enum class SymbolKind : std::uint8_t {
  DiffeoCoeff,    // a_j, j >= 1
  Coupling,       // lambda_s, s >= 3
  MassSq,         // msq
  FixedOffshell,  // xp
  NonlocalCoeff,  // alpha_k
  PropagatorBeta, // beta_k
  Generic,
  EdgeVariable,   // x_S (standard) or X_S (generalized propagator)
};

// Leg subsets are bitmasks: bit j set <=> leg j belongs to the subset (j >= 1).
using LegMask = std::uint64_t;
inline constexpr int max_leg_label = 31;

inline constexpr LegMask leg_bit(int label) { return LegMask{1} << label; }
inline int leg_count(LegMask m) { return std::popcount(m); }
inline LegMask leg_range(int first, int last)
{
  LegMask m = 0;
  for (int j = first; j <= last; ++j)
    m |= leg_bit(j);
  return m;
}

// Interned symbol. The 64-bit key packs (kind, index) so equal (kind, index)
// always yields the identical symbol, and key order is the symbol order.
class Symbol {
public:
  constexpr Symbol() = default;

  static Symbol diffeo(int j) { return make(SymbolKind::DiffeoCoeff, check_index(j, 1)); }
  static Symbol coupling(int s) { return make(SymbolKind::Coupling, check_index(s, 3)); }
  static Symbol mass_sq() { return make(SymbolKind::MassSq, 0); }
  static Symbol fixed_offshell() { return make(SymbolKind::FixedOffshell, 0); }
  static Symbol nonlocal(int k) { return make(SymbolKind::NonlocalCoeff, check_index(k, 0)); }
  static Symbol beta(int k) { return make(SymbolKind::PropagatorBeta, check_index(k, 0)); }
  static Symbol generic(std::string_view name);
  // generalized = true selects the X_S family.
  static Symbol edge(LegMask legs, bool generalized = false)
  {
    if (legs == 0 || (legs & 1u) != 0 || legs >= (LegMask{1} << (max_leg_label + 1)))
      throw Error("edge variable needs a nonempty subset of legs 1.." +
                  std::to_string(max_leg_label));
    return make(SymbolKind::EdgeVariable, (generalized ? (std::uint64_t{1} << 32) : 0) | legs);
  }

  // Parses the names produced by name(): a3, lambda4, msq, xp, alpha1, beta2,
  // x1, x(1+2), X(2+3); anything else becomes a generic symbol.
  static Symbol parse(std::string_view name);

  SymbolKind kind() const { return static_cast<SymbolKind>(key_ >> 56); }
  std::uint64_t index() const { return key_ & ((std::uint64_t{1} << 56) - 1); }
  std::uint64_t key() const { return key_; }

  bool is_edge() const { return kind() == SymbolKind::EdgeVariable; }
  bool is_generalized_edge() const { return is_edge() && ((index() >> 32) & 1u) != 0; }
  LegMask legs() const { return is_edge() ? (index() & 0xffffffffu) : 0; }
  // Symbols that may carry negative exponents: propagator variables and x_p.
  bool may_divide() const { return is_edge() || kind() == SymbolKind::FixedOffshell; }

  std::string name() const;

  friend constexpr bool operator==(Symbol a, Symbol b) { return a.key_ == b.key_; }
  friend constexpr auto operator<=>(Symbol a, Symbol b) { return a.key_ <=> b.key_; }

private:
  constexpr explicit Symbol(std::uint64_t key) : key_(key) {}

  static Symbol make(SymbolKind kind, std::uint64_t index)
  {
    return Symbol((static_cast<std::uint64_t>(kind) << 56) | index);
  }
  static std::uint64_t check_index(int v, int lo)
  {
    if (v < lo)
      throw Error("symbol index " + std::to_string(v) + " below " + std::to_string(lo));
    return static_cast<std::uint64_t>(v);
  }

  std::uint64_t key_ = 0;
};

namespace detail {

// Generic names get sequential ids; insertion is serialized, ids never change.
class GenericNames {
public:
  static GenericNames& instance()
  {
    static GenericNames table;
    return table;
  }

  std::uint64_t intern(std::string_view name)
  {
    std::lock_guard lock(mutex_);
    auto it = ids_.find(std::string(name));
    if (it != ids_.end())
      return it->second;
    std::uint64_t id = names_.size();
    names_.emplace_back(name);
    ids_.emplace(std::string(name), id);
    return id;
  }

  std::string lookup(std::uint64_t id)
  {
    std::lock_guard lock(mutex_);
    return id < names_.size() ? names_[id] : "?";
  }

private:
  std::mutex mutex_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint64_t> ids_;
};

inline std::string legs_name(LegMask m)
{
  std::string out;
  for (int j = 1; j <= max_leg_label; ++j) {
    if ((m & leg_bit(j)) == 0)
      continue;
    if (!out.empty())
      out += "+";
    out += std::to_string(j);
  }
  return leg_count(m) == 1 ? out : "(" + out + ")";
}

inline bool parse_int_suffix(std::string_view s, std::string_view prefix, int& out)
{
  if (s.size() <= prefix.size() || s.substr(0, prefix.size()) != prefix)
    return false;
  int v = 0;
  for (char c : s.substr(prefix.size())) {
    if (c < '0' || c > '9' || v > 100000)
      return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

} // namespace detail

inline Symbol Symbol::generic(std::string_view name)
{
  return make(SymbolKind::Generic, detail::GenericNames::instance().intern(name));
}

inline std::string Symbol::name() const
{
  auto idx = std::to_string(index());
  switch (kind()) {
  case SymbolKind::DiffeoCoeff: return "a" + idx;
  case SymbolKind::Coupling: return "lambda" + idx;
  case SymbolKind::MassSq: return "msq";
  case SymbolKind::FixedOffshell: return "xp";
  case SymbolKind::NonlocalCoeff: return "alpha" + idx;
  case SymbolKind::PropagatorBeta: return "beta" + idx;
  case SymbolKind::Generic: return detail::GenericNames::instance().lookup(index());
  case SymbolKind::EdgeVariable:
    return (is_generalized_edge() ? "X" : "x") + detail::legs_name(legs());
  }
  return "?";
}

inline Symbol Symbol::parse(std::string_view name)
{
  int v = 0;
  if (name == "msq")
    return mass_sq();
  if (name == "xp")
    return fixed_offshell();
  if (detail::parse_int_suffix(name, "lambda", v) && v >= 3)
    return coupling(v);
  if (detail::parse_int_suffix(name, "alpha", v))
    return nonlocal(v);
  if (detail::parse_int_suffix(name, "beta", v))
    return beta(v);
  if (detail::parse_int_suffix(name, "a", v) && v >= 1)
    return diffeo(v);
  if (!name.empty() && (name[0] == 'x' || name[0] == 'X') && name.size() > 1) {
    bool gen = name[0] == 'X';
    std::string_view body = name.substr(1);
    if (body.front() == '(' && body.back() == ')')
      body = body.substr(1, body.size() - 2);
    LegMask m = 0;
    int cur = -1;
    bool ok = true;
    for (char c : body) {
      if (c >= '0' && c <= '9') {
        cur = (cur < 0 ? 0 : cur * 10) + (c - '0');
        if (cur > max_leg_label)
          ok = false;
      } else if (c == '+' && cur > 0) {
        m |= leg_bit(cur);
        cur = -1;
      } else {
        ok = false;
      }
    }
    if (ok && cur > 0) {
      m |= leg_bit(cur);
      return edge(m, gen);
    }
  }
  return generic(name);
}

} // namespace fdiff

template <>
struct std::hash<fdiff::Symbol> {
  std::size_t operator()(fdiff::Symbol s) const noexcept { return std::hash<std::uint64_t>{}(s.key()); }
};
