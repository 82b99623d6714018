#pragma once

#include "fdiff/scalar.hpp"
#include "fdiff/symbol.hpp"

#include <algorithm>
#include <initializer_list>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fdiff {

// Power product of symbols. Exponents are nonzero; negative exponents are
// only legal for symbols with may_divide() (propagator variables and x_p).
class Monomial {
public:
  using Factor = std::pair<Symbol, int>;

  Monomial() = default;
  explicit Monomial(Symbol s, int e = 1)
  {
    if (e != 0)
      factors_.emplace_back(s, e);
    check();
  }
  Monomial(std::initializer_list<Factor> fs) : Monomial(std::vector<Factor>(fs)) {}
  explicit Monomial(std::vector<Factor> fs)
  {
    std::sort(fs.begin(), fs.end(), [](auto& a, auto& b) { return a.first < b.first; });
    for (auto& [s, e] : fs) {
      if (!factors_.empty() && factors_.back().first == s)
        factors_.back().second += e;
      else
        factors_.emplace_back(s, e);
      if (factors_.back().second == 0)
        factors_.pop_back();
    }
    check();
  }

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }
  std::size_t size() const { return factors_.size(); }

  int exponent(Symbol s) const
  {
    auto it = std::lower_bound(factors_.begin(), factors_.end(), s,
                               [](const Factor& f, Symbol v) { return f.first < v; });
    return it != factors_.end() && it->first == s ? it->second : 0;
  }

  // Sum of positive exponents.
  int degree() const
  {
    int d = 0;
    for (auto& f : factors_)
      d += std::max(f.second, 0);
    return d;
  }
  bool has_negative() const
  {
    return std::any_of(factors_.begin(), factors_.end(), [](auto& f) { return f.second < 0; });
  }
  bool contains(Symbol s) const { return exponent(s) != 0; }

  // Factor with s removed.
  Monomial without(Symbol s) const
  {
    Monomial m;
    for (auto& f : factors_)
      if (f.first != s)
        m.factors_.push_back(f);
    return m;
  }
  Monomial numerator() const
  {
    Monomial m;
    for (auto& f : factors_)
      if (f.second > 0)
        m.factors_.push_back(f);
    return m;
  }
  Monomial denominator() const
  {
    Monomial m;
    for (auto& f : factors_)
      if (f.second < 0)
        m.factors_.emplace_back(f.first, -f.second);
    return m;
  }
  Monomial inverse() const
  {
    Monomial m = *this;
    for (auto& f : m.factors_)
      f.second = -f.second;
    m.check();
    return m;
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b)
  {
    Monomial m;
    m.factors_.reserve(a.factors_.size() + b.factors_.size());
    auto i = a.factors_.begin(), j = b.factors_.begin();
    while (i != a.factors_.end() && j != b.factors_.end()) {
      if (i->first < j->first) {
        m.factors_.push_back(*i++);
      } else if (j->first < i->first) {
        m.factors_.push_back(*j++);
      } else {
        int e = i->second + j->second;
        if (e != 0)
          m.factors_.emplace_back(i->first, e);
        ++i;
        ++j;
      }
    }
    m.factors_.insert(m.factors_.end(), i, a.factors_.end());
    m.factors_.insert(m.factors_.end(), j, b.factors_.end());
    return m;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.factors_ == b.factors_; }

  // Graded lexicographic: lower degree first; within a degree, at the first
  // differing position the smaller symbol (or the larger exponent) comes first.
  friend bool term_order_less(const Monomial& a, const Monomial& b)
  {
    int da = a.degree(), db = b.degree();
    if (da != db)
      return da < db;
    std::size_t n = std::min(a.factors_.size(), b.factors_.size());
    for (std::size_t k = 0; k < n; ++k) {
      auto& fa = a.factors_[k];
      auto& fb = b.factors_[k];
      if (fa.first != fb.first)
        return fa.first < fb.first;
      if (fa.second != fb.second)
        return fa.second > fb.second;
    }
    return a.factors_.size() < b.factors_.size();
  }

  std::size_t hash() const
  {
    std::size_t h = 0x9e3779b97f4a7c15ull;
    for (auto& [s, e] : factors_)
      h = (h ^ (s.key() + static_cast<std::size_t>(e) * 0x100000001b3ull)) * 0xff51afd7ed558ccdull;
    return h;
  }

  // "a1^2*lambda3" for the positive part; empty for 1.
  std::string to_string() const
  {
    std::string out;
    for (auto& [s, e] : factors_) {
      if (!out.empty())
        out += "*";
      out += s.name();
      if (e != 1)
        out += "^" + std::to_string(e);
    }
    return out;
  }

private:
  void check() const
  {
    for (auto& [s, e] : factors_)
      if (e < 0 && !s.may_divide())
        throw Error("symbol " + s.name() + " may not appear in a denominator");
  }

  std::vector<Factor> factors_;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const { return m.hash(); }
};

using Substitution = std::map<Symbol, class RationalFunction>;

// Exact rational function whose denominator is a monomial in propagator
// variables (and x_p). Stored as a Laurent polynomial: a canonical sorted list
// of (monomial, nonzero scalar). numerator()/denominator() expose the reduced
// fraction form.
class RationalFunction {
public:
  using Term = std::pair<Monomial, Scalar>;

  RationalFunction() = default;
  RationalFunction(long c) : RationalFunction(Scalar(c)) {}
  RationalFunction(const Rational& c) : RationalFunction(Scalar(c)) {}
  RationalFunction(const Scalar& c)
  {
    if (!c.is_zero())
      terms_.emplace_back(Monomial(), c);
  }
  RationalFunction(Symbol s) { terms_.emplace_back(Monomial(s), Scalar(1)); }
  RationalFunction(Monomial m, Scalar c = Scalar(1))
  {
    if (!c.is_zero())
      terms_.emplace_back(std::move(m), std::move(c));
  }

  static RationalFunction from_terms(std::vector<Term> terms);
  static RationalFunction i() { return RationalFunction(Scalar::i()); }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].first.is_one()); }
  bool is_monomial() const { return terms_.size() == 1; }
  bool is_polynomial() const
  {
    return std::none_of(terms_.begin(), terms_.end(), [](auto& t) { return t.first.has_negative(); });
  }
  Scalar constant_value() const
  {
    if (!is_constant())
      throw Error("expression is not constant: " + to_string());
    return terms_.empty() ? Scalar() : terms_[0].second;
  }

  bool contains(Symbol s) const
  {
    return std::any_of(terms_.begin(), terms_.end(), [&](auto& t) { return t.first.contains(s); });
  }
  template <class Pred>
  bool contains_if(Pred p) const
  {
    for (auto& t : terms_)
      for (auto& f : t.first.factors())
        if (p(f.first))
          return true;
    return false;
  }
  std::vector<Symbol> symbols() const
  {
    std::vector<Symbol> out;
    for (auto& t : terms_)
      for (auto& f : t.first.factors())
        out.push_back(f.first);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Least common multiple of all term denominators.
  Monomial denominator() const
  {
    std::map<Symbol, int> lcm;
    for (auto& t : terms_)
      for (auto& [s, e] : t.first.factors())
        if (e < 0)
          lcm[s] = std::max(lcm[s], -e);
    std::vector<Monomial::Factor> fs(lcm.begin(), lcm.end());
    return Monomial(std::move(fs));
  }
  RationalFunction numerator() const { return *this * RationalFunction(denominator()); }

  RationalFunction operator-() const
  {
    RationalFunction r = *this;
    for (auto& t : r.terms_)
      t.second = -t.second;
    return r;
  }

  RationalFunction& operator+=(const RationalFunction& o) { return *this = *this + o; }
  RationalFunction& operator-=(const RationalFunction& o) { return *this = *this - o; }
  RationalFunction& operator*=(const RationalFunction& o) { return *this = *this * o; }

  friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b)
  {
    return merge(a, b, false);
  }
  friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b)
  {
    return merge(a, b, true);
  }
  friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);

  // Division is exact only by a single term (the only division a propagator needs).
  friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b)
  {
    if (b.is_zero())
      throw DivisionByZero();
    if (!b.is_monomial())
      throw Error("division by a non-monomial expression " + b.to_string());
    return a * RationalFunction(b.terms_[0].first.inverse(), b.terms_[0].second.inverse());
  }

  RationalFunction pow(unsigned e) const
  {
    RationalFunction result(1), base = *this;
    while (e) {
      if (e & 1u)
        result *= base;
      e >>= 1;
      if (e)
        base *= base;
    }
    return result;
  }

  RationalFunction scaled(const Scalar& c) const
  {
    if (c.is_zero())
      return {};
    RationalFunction r = *this;
    for (auto& t : r.terms_)
      t.second *= c;
    return r;
  }

  friend bool operator==(const RationalFunction& a, const RationalFunction& b)
  {
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const RationalFunction& a, const RationalFunction& b) { return !(a == b); }

  // Coefficient of s^k (k may be negative for divisible symbols).
  RationalFunction coefficient_of(Symbol s, int k) const
  {
    RationalFunction r;
    for (auto& t : terms_)
      if (t.first.exponent(s) == k)
        r.terms_.emplace_back(t.first.without(s), t.second);
    r.normalize();
    return r;
  }

  // Sets every listed symbol to zero. Symbols appearing with negative exponent
  // raise an error.
  RationalFunction set_zero(const std::vector<Symbol>& zeros) const;

  RationalFunction substitute(const Substitution& bindings) const;

  // Canonical string: terms in ascending term order, e.g. "-6*a2+12*a1^2".
  std::string to_string() const;

  std::size_t hash() const
  {
    std::size_t h = terms_.size();
    for (auto& [m, c] : terms_)
      h = h * 31 + (m.hash() ^ c.hash());
    return h;
  }

private:
  friend class Accumulator;

  void normalize()
  {
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return term_order_less(a.first, b.first); });
  }

  static RationalFunction merge(const RationalFunction& a, const RationalFunction& b, bool negate)
  {
    RationalFunction r;
    r.terms_.reserve(a.terms_.size() + b.terms_.size());
    auto i = a.terms_.begin(), j = b.terms_.begin();
    while (i != a.terms_.end() || j != b.terms_.end()) {
      if (j == b.terms_.end() || (i != a.terms_.end() && term_order_less(i->first, j->first))) {
        r.terms_.push_back(*i++);
      } else if (i == a.terms_.end() || term_order_less(j->first, i->first)) {
        r.terms_.emplace_back(j->first, negate ? -j->second : j->second);
        ++j;
      } else {
        Scalar c = negate ? i->second - j->second : i->second + j->second;
        if (!c.is_zero())
          r.terms_.emplace_back(i->first, std::move(c));
        ++i;
        ++j;
      }
    }
    return r;
  }

  std::vector<Term> terms_;
};

using Polynomial = RationalFunction;

// Hash-based running sum; cheaper than repeated canonical merges when many
// products are added together.
class Accumulator {
public:
  void add(const Monomial& m, const Scalar& c)
  {
    if (c.is_zero())
      return;
    auto [it, fresh] = terms_.try_emplace(m, c);
    if (!fresh)
      it->second += c;
  }
  void add(const RationalFunction& r)
  {
    for (auto& [m, c] : r.terms_)
      add(m, c);
  }
  void add_scaled(const RationalFunction& r, const Scalar& k)
  {
    for (auto& [m, c] : r.terms_)
      add(m, c * k);
  }
  void add_product(const RationalFunction& a, const RationalFunction& b)
  {
    for (auto& [ma, ca] : a.terms_)
      for (auto& [mb, cb] : b.terms_)
        add(ma * mb, ca * cb);
  }
  void merge(const Accumulator& o)
  {
    for (auto& [m, c] : o.terms_)
      add(m, c);
  }
  bool empty() const { return terms_.empty(); }

  RationalFunction result() const
  {
    RationalFunction r;
    r.terms_.reserve(terms_.size());
    for (auto& [m, c] : terms_)
      if (!c.is_zero())
        r.terms_.emplace_back(m, c);
    r.normalize();
    return r;
  }

private:
  std::unordered_map<Monomial, Scalar, MonomialHash> terms_;
};

inline RationalFunction RationalFunction::from_terms(std::vector<Term> terms)
{
  Accumulator acc;
  for (auto& [m, c] : terms)
    acc.add(m, c);
  return acc.result();
}

inline RationalFunction operator*(const RationalFunction& a, const RationalFunction& b)
{
  if (a.is_zero() || b.is_zero())
    return {};
  const RationalFunction& small = a.terms_.size() <= b.terms_.size() ? a : b;
  const RationalFunction& big = a.terms_.size() <= b.terms_.size() ? b : a;
  if (small.terms_.size() == 1) {
    // Multiplying by one term preserves distinctness; only the order may change.
    RationalFunction r;
    r.terms_.reserve(big.terms_.size());
    auto& [m, c] = small.terms_[0];
    for (auto& [bm, bc] : big.terms_)
      r.terms_.emplace_back(m.is_one() ? bm : bm * m, c.is_one() ? bc : bc * c);
    if (!m.is_one())
      r.normalize();
    return r;
  }
  Accumulator acc;
  acc.add_product(a, b);
  return acc.result();
}

inline RationalFunction RationalFunction::set_zero(const std::vector<Symbol>& zeros) const
{
  if (zeros.empty())
    return *this;
  RationalFunction r;
  for (auto& t : terms_) {
    bool dead = false;
    for (Symbol z : zeros) {
      int e = t.first.exponent(z);
      if (e < 0)
        throw Error("binding " + z.name() + " -> 0 annihilates a denominator");
      if (e > 0) {
        dead = true;
        break;
      }
    }
    if (!dead)
      r.terms_.push_back(t);
  }
  return r;
}

inline RationalFunction RationalFunction::substitute(const Substitution& bindings) const
{
  if (bindings.empty())
    return *this;
  std::map<std::pair<Symbol, int>, RationalFunction> powers;
  auto power = [&](Symbol s, int e) -> const RationalFunction& {
    auto key = std::make_pair(s, e);
    auto it = powers.find(key);
    if (it != powers.end())
      return it->second;
    const RationalFunction& v = bindings.at(s);
    RationalFunction p;
    if (e > 0) {
      p = v.pow(static_cast<unsigned>(e));
    } else {
      if (v.is_zero())
        throw Error("binding " + s.name() + " -> 0 annihilates a denominator");
      if (!v.is_monomial())
        throw Error("binding for denominator symbol " + s.name() + " is not a single term");
      p = (RationalFunction(1) / v).pow(static_cast<unsigned>(-e));
    }
    return powers.emplace(key, std::move(p)).first->second;
  };
  Accumulator acc;
  for (auto& [m, c] : terms_) {
    std::vector<Monomial::Factor> keep;
    RationalFunction factor(c);
    for (auto& [s, e] : m.factors()) {
      if (bindings.count(s))
        factor = factor * power(s, e);
      else
        keep.emplace_back(s, e);
    }
    if (factor.is_zero())
      continue;
    Monomial rest(std::move(keep));
    for (auto& [fm, fc] : factor.terms_)
      acc.add(fm * rest, fc);
  }
  return acc.result();
}

namespace detail {

inline std::string coefficient_prefix(const Scalar& c, bool bare_monomial_follows, bool first)
{
  // Renders c followed by '*' when a monomial follows; handles signs so terms
  // can be concatenated directly.
  std::string sign;
  Scalar mag = c;
  if (c.is_real() && sgn(c.re()) < 0) {
    sign = "-";
    mag = -c;
  } else if (c.is_imaginary() && sgn(c.im()) < 0) {
    sign = "-";
    mag = -c;
  }
  if (sign.empty() && !first)
    sign = "+";
  std::string body;
  if (mag.is_one())
    body = bare_monomial_follows ? "" : "1";
  else
    body = mag.to_string() + (bare_monomial_follows ? "*" : "");
  return sign + body;
}

inline std::string term_string(const Monomial& m, const Scalar& c, bool first)
{
  Monomial num = m.numerator();
  Monomial den = m.denominator();
  std::string out;
  if (num.is_one()) {
    out = coefficient_prefix(c, false, first);
  } else {
    out = coefficient_prefix(c, true, first) + num.to_string();
  }
  if (!den.is_one())
    out += "/" + (den.size() == 1 && den.factors()[0].second == 1 ? den.to_string()
                                                                   : "(" + den.to_string() + ")");
  return out;
}

} // namespace detail

inline std::string RationalFunction::to_string() const
{
  if (terms_.empty())
    return "0";
  std::string out;
  bool first = true;
  for (auto& [m, c] : terms_) {
    out += detail::term_string(m, c, first);
    first = false;
  }
  return out;
}

inline std::string to_string(const RationalFunction& r) { return r.to_string(); }

inline std::ostream& operator<<(std::ostream& os, const RationalFunction& r) { return os << r.to_string(); }
inline std::ostream& operator<<(std::ostream& os, const Scalar& s) { return os << s.to_string(); }

inline RationalFunction sym(Symbol s) { return RationalFunction(s); }
inline RationalFunction sym(std::string_view name) { return RationalFunction(Symbol::parse(name)); }

namespace detail {

class ExpressionParser {
public:
  explicit ExpressionParser(std::string_view text) : s_(text) {}

  RationalFunction parse()
  {
    RationalFunction r = expr();
    skip();
    if (pos_ != s_.size())
      fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return r;
  }

private:
  [[noreturn]] void fail(const std::string& what) const
  {
    throw Error("cannot parse expression '" + std::string(s_) + "' at offset " +
                std::to_string(pos_) + ": " + what);
  }
  void skip()
  {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
      ++pos_;
  }
  bool eat(char c)
  {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  RationalFunction expr()
  {
    RationalFunction r;
    bool first = true;
    for (;;) {
      bool neg = false;
      if (eat('-'))
        neg = true;
      else if (!first && !eat('+'))
        break;
      else if (first)
        eat('+');
      RationalFunction t = term();
      r = neg ? r - t : r + t;
      first = false;
    }
    return r;
  }

  RationalFunction term()
  {
    RationalFunction r = power();
    for (;;) {
      if (eat('*'))
        r = r * power();
      else if (eat('/'))
        r = r / power();
      else
        return r;
    }
  }

  RationalFunction power()
  {
    if (eat('-'))
      return -power();
    RationalFunction base = primary();
    if (eat('^')) {
      bool neg = eat('-');
      long e = integer();
      RationalFunction p = base.pow(static_cast<unsigned>(e));
      return neg ? RationalFunction(1) / p : p;
    }
    return base;
  }

  long integer()
  {
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && is_digit(s_[pos_]))
      ++pos_;
    if (start == pos_)
      fail("expected integer");
    if (pos_ - start > 9)
      fail("exponent too large");
    return std::stol(std::string(s_.substr(start, pos_ - start)));
  }

  RationalFunction primary()
  {
    skip();
    if (pos_ >= s_.size())
      fail("unexpected end");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      RationalFunction r = expr();
      if (!eat(')'))
        fail("expected ')'");
      return r;
    }
    if (is_digit(c)) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && is_digit(s_[pos_]))
        ++pos_;
      return RationalFunction(Rational(std::string(s_.substr(start, pos_ - start))));
    }
    if (is_alpha(c)) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (is_alpha(s_[pos_]) || is_digit(s_[pos_])))
        ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      if ((name == "x" || name == "X") && pos_ < s_.size() && s_[pos_] == '(') {
        std::size_t close = s_.find(')', pos_);
        if (close == std::string_view::npos)
          fail("unterminated edge label");
        name += std::string(s_.substr(pos_, close - pos_ + 1));
        pos_ = close + 1;
      }
      if (name == "i")
        return RationalFunction::i();
      return RationalFunction(Symbol::parse(name));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline RationalFunction parse_expression(std::string_view text)
{
  return detail::ExpressionParser(text).parse();
}

} // namespace fdiff

template <>
struct std::hash<fdiff::Monomial> {
  std::size_t operator()(const fdiff::Monomial& m) const noexcept { return m.hash(); }
};
