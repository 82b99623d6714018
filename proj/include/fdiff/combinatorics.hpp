#pragma once

#include "fdiff/polynomial.hpp"

#include <functional>
#include <vector>

namespace fdiff {

// Partial Bell polynomial B_{n,k}(x_1, ..., x_{n-k+1}); args[0] is x_1.
// Uses B_{n,k} = sum_i C(n-1, i-1) x_i B_{n-i,k-1}.
class BellTable {
public:
  BellTable(int max_n, std::vector<RationalFunction> args) : max_n_(max_n), args_(std::move(args))
  {
    table_.assign(static_cast<std::size_t>(max_n + 1), {});
    for (auto& row : table_)
      row.resize(static_cast<std::size_t>(max_n + 1));
    done_.assign(static_cast<std::size_t>((max_n + 1) * (max_n + 1)), false);
  }

  const RationalFunction& operator()(int n, int k)
  {
    if (n < 0 || k < 0 || n > max_n_)
      throw Error("Bell index out of range");
    if (k > n)
      return zero_;
    auto idx = static_cast<std::size_t>(n * (max_n_ + 1) + k);
    RationalFunction& slot = table_[n][k];
    if (done_[idx])
      return slot;
    if (n == 0 && k == 0) {
      slot = RationalFunction(1);
    } else if (n == 0 || k == 0 || k > n) {
      slot = RationalFunction();
    } else {
      if (static_cast<int>(args_.size()) < n - k + 1)
        throw Error("bell_partial(" + std::to_string(n) + "," + std::to_string(k) + ") needs " +
                    std::to_string(n - k + 1) + " arguments, got " + std::to_string(args_.size()));
      Accumulator acc;
      for (int i = 1; i <= n - k + 1; ++i) {
        const RationalFunction& x = args_[static_cast<std::size_t>(i - 1)];
        if (x.is_zero())
          continue;
        const RationalFunction& rest = (*this)(n - i, k - 1);
        if (rest.is_zero())
          continue;
        acc.add_scaled(x * rest, Scalar(binomial(n - 1, i - 1)));
      }
      slot = acc.result();
    }
    done_[idx] = true;
    return slot;
  }

private:
  int max_n_;
  std::vector<RationalFunction> args_;
  std::vector<std::vector<RationalFunction>> table_;
  std::vector<bool> done_;
  RationalFunction zero_;
};

inline RationalFunction bell_partial(int n, int k, const std::vector<RationalFunction>& args)
{
  if (n < 0 || k < 0)
    throw Error("bell_partial needs nonnegative indices");
  if (n > 0 && k > 0 && k <= n && static_cast<int>(args.size()) < n - k + 1)
    throw Error("bell_partial(" + std::to_string(n) + "," + std::to_string(k) + ") needs " +
                std::to_string(n - k + 1) + " arguments, got " + std::to_string(args.size()));
  BellTable t(n, args);
  return t(n, k);
}

// F_m(a, b) = b/(ma+b) * C(ma+b, m).
inline Rational fuss_catalan(long m, long a, long b)
{
  if (m < 0 || a < 0 || b < 1)
    throw Error("fuss_catalan needs m >= 0, a >= 0, b >= 1");
  if (m == 0)
    return Rational(1);
  Rational r = Rational(b, m * a + b) * binomial(m * a + b, m);
  r.canonicalize();
  return r;
}

// Calls f(blocks) for every set partition of the listed items; blocks are
// ordered by their first element, items inside a block keep input order.
template <class T>
void for_each_set_partition(const std::vector<T>& items,
                            const std::function<void(const std::vector<std::vector<T>>&)>& f)
{
  std::vector<std::vector<T>> blocks;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == items.size()) {
      f(blocks);
      return;
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].push_back(items[i]);
      rec(i + 1);
      blocks[b].pop_back();
    }
    blocks.push_back({items[i]});
    rec(i + 1);
    blocks.pop_back();
  };
  rec(0);
}

// Set partitions of a bitmask into bitmask blocks.
inline void for_each_mask_partition(std::uint64_t mask, const std::function<void(const std::vector<std::uint64_t>&)>& f)
{
  std::vector<std::uint64_t> blocks;
  std::function<void(std::uint64_t)> rec = [&](std::uint64_t rest) {
    if (rest == 0) {
      f(blocks);
      return;
    }
    std::uint64_t low = rest & (~rest + 1);
    std::uint64_t others = rest ^ low;
    // Enumerate every subset of the remaining bits to join the lowest one.
    std::uint64_t sub = others;
    for (;;) {
      blocks.push_back(low | sub);
      rec(others ^ sub);
      blocks.pop_back();
      if (sub == 0)
        break;
      sub = (sub - 1) & others;
    }
  };
  rec(mask);
}

} // namespace fdiff
