#pragma once

#include "fdiff/combinatorics.hpp"
#include "fdiff/feynman_rules.hpp"

#include <memory>
#include <unordered_map>

namespace fdiff {

struct TreeNode;
using NodePtr = std::shared_ptr<const TreeNode>;

// A leaf (leaf > 0) or an internal vertex whose children are ordered by
// their smallest leaf label. Subtrees are shared between enumerated trees.
struct TreeNode {
  LegMask mask = 0;
  int leaf = 0;
  std::vector<NodePtr> children;
  std::string encoding;

  bool is_leaf() const { return leaf > 0; }
  int valence() const { return static_cast<int>(children.size()) + 1; }
};

// Tree hanging from one distinguished edge: the offshell root leg (rooted)
// or external leg root_leg acting as a virtual root (unrooted).
struct TreeTopology {
  NodePtr root;
  bool rooted = true;
  int root_leg = 0;
  EdgeContext context;

  std::string encoding() const { return root->encoding + "@" + std::to_string(rooted ? 0 : root_leg); }

  // Internal vertices in preorder, with the preorder index of each parent (-1 at the root).
  std::vector<std::pair<const TreeNode*, int>> internal_vertices() const
  {
    std::vector<std::pair<const TreeNode*, int>> out;
    std::function<void(const TreeNode*, int)> walk = [&](const TreeNode* v, int parent) {
      if (v->is_leaf())
        return;
      int me = static_cast<int>(out.size());
      out.emplace_back(v, parent);
      for (auto& c : v->children)
        walk(c.get(), me);
    };
    walk(root.get(), -1);
    return out;
  }

  int internal_edge_count() const
  {
    int n = 0;
    for (auto& [v, p] : internal_vertices())
      n += p >= 0 ? 1 : 0;
    return n;
  }
  // Labeled leaves plus the distinguished root edge.
  int leg_total() const { return leg_count(root->mask) + 1; }

  // Momentum sets flowing into v along each adjacent edge: children first, parent last.
  std::vector<LegMask> adjacent_sets(const TreeNode& v) const
  {
    std::vector<LegMask> adj;
    for (auto& c : v.children)
      adj.push_back(c->mask);
    adj.push_back(context.universe ^ v.mask);
    return adj;
  }
};

// Memoized enumeration of rooted trees over leaf subsets, all internal
// vertices of valence >= 3. One enumerator can serve several leaf sets.
class TreeEnumerator {
public:
  const std::vector<NodePtr>& trees_over(LegMask mask)
  {
    auto it = memo_.find(mask);
    if (it != memo_.end())
      return it->second;
    std::vector<NodePtr> out;
    if (leg_count(mask) == 1) {
      auto leaf = std::make_shared<TreeNode>();
      leaf->mask = mask;
      leaf->leaf = std::countr_zero(mask);
      leaf->encoding = std::to_string(leaf->leaf);
      out.push_back(std::move(leaf));
    } else {
      for_each_mask_partition(mask, [&](const std::vector<std::uint64_t>& blocks) {
        if (blocks.size() < 2)
          return;
        std::vector<const std::vector<NodePtr>*> options;
        for (auto b : blocks)
          options.push_back(&trees_over(b));
        std::vector<std::size_t> pick(blocks.size(), 0);
        for (;;) {
          auto node = std::make_shared<TreeNode>();
          node->mask = mask;
          node->encoding = "(";
          for (std::size_t j = 0; j < blocks.size(); ++j) {
            node->children.push_back((*options[j])[pick[j]]);
            if (j)
              node->encoding += ",";
            node->encoding += node->children.back()->encoding;
          }
          node->encoding += ")";
          out.push_back(std::move(node));
          std::size_t j = 0;
          while (j < pick.size() && ++pick[j] == options[j]->size())
            pick[j++] = 0;
          if (j == pick.size())
            break;
        }
      });
    }
    return memo_.emplace(mask, std::move(out)).first->second;
  }

private:
  std::unordered_map<LegMask, std::vector<NodePtr>> memo_;
};

// Rooted: n labeled leaves plus the root leg. Unrooted: legs 1..n with leg n
// as virtual root.
inline std::vector<TreeTopology> enumerate_trees(int n, bool rooted)
{
  if (rooted ? n < 1 : n < 3)
    throw Error(rooted ? "rooted trees need at least one leaf" : "unrooted trees need at least three legs");
  TreeEnumerator en;
  LegMask leaves = rooted ? leg_range(1, n) : leg_range(1, n - 1);
  EdgeContext ctx = rooted ? EdgeContext::rooted_over(n) : EdgeContext::unrooted_over(n);
  std::vector<TreeTopology> out;
  for (auto& r : en.trees_over(leaves))
    out.push_back({r, rooted, rooted ? 0 : n, ctx});
  return out;
}

} // namespace fdiff
