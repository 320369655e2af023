#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace focs {

using NodeId = uint32_t;

inline constexpr NodeId kFalse = 0;
inline constexpr NodeId kTrue = 1;
inline constexpr std::size_t kDefaultNodeBudget = 10'000'000;

/// Decision node. `level` is the position of the tested variable in the
/// diagram's order; terminals sit at level == number of variables.
struct BddNode {
  uint32_t level;
  NodeId lo;
  NodeId hi;
  friend bool operator==(const BddNode&, const BddNode&) = default;
};

class Obdd;

/// Mutable node store for one compilation session: unique table for
/// reduction plus an ITE cache. Not thread-safe.
class BddManager {
public:
  /// `order[level]` is the variable tested at that level.
  explicit BddManager(std::vector<std::size_t> order, std::size_t node_budget = kDefaultNodeBudget);

  std::size_t num_vars() const noexcept { return order_.size(); }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t level_of(std::size_t var) const { return level_of_.at(var); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const BddNode& node(NodeId id) const { return nodes_[id]; }

  /// Reduced node constructor.
  NodeId make(uint32_t level, NodeId lo, NodeId hi);
  NodeId var(std::size_t variable);

  NodeId ite(NodeId f, NodeId g, NodeId h);
  NodeId negate(NodeId f) { return ite(f, kFalse, kTrue); }
  NodeId conjoin(NodeId f, NodeId g) { return ite(f, g, kFalse); }
  NodeId disjoin(NodeId f, NodeId g) { return ite(f, kTrue, g); }

  /// Substitutes, for each level l of `source`, the function `replacement[l]`
  /// (a node of this manager) for the variable tested at that level.
  NodeId compose(const Obdd& source, std::span<const NodeId> replacement);

  /// Shannon expansion of an arbitrary predicate over all variables.
  /// Exponential; meant for oracles and small tests.
  NodeId from_function(const std::function<bool(std::span<const uint8_t>)>& fn);

  Obdd freeze(NodeId root) const;
  NodeId import(const Obdd& d);

private:
  struct Key {
    uint64_t a, b;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<uint64_t>{}(k.a * 0x9e3779b97f4a7c15ULL ^ (k.b + 0x7f4a7c159e3779b9ULL + (k.a << 6)));
    }
  };

  uint32_t top_level(NodeId f) const { return nodes_[f].level; }
  NodeId cofactor(NodeId f, uint32_t level, bool value) const;

  std::vector<std::size_t> order_;
  std::vector<std::size_t> level_of_;
  std::size_t budget_;
  std::vector<BddNode> nodes_;
  std::unordered_map<Key, NodeId, KeyHash> unique_;
  std::unordered_map<Key, NodeId, KeyHash> ite_cache_;
};

/// Frozen reduced OBDD. Node tables are canonical: nodes are numbered in
/// post-order (lo before hi) from the root, so extensionally equal functions
/// under the same order have identical tables.
class Obdd {
public:
  Obdd(std::vector<std::size_t> order, std::vector<BddNode> nodes, NodeId root);

  static Obdd constant(bool value, std::vector<std::size_t> order);

  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t num_vars() const noexcept { return order_.size(); }
  const std::vector<BddNode>& nodes() const noexcept { return nodes_; }
  NodeId root() const noexcept { return root_; }
  /// Decision nodes, excluding the two terminals.
  std::size_t node_count() const noexcept { return nodes_.size() - 2; }

  bool is_true() const { return root_ == kTrue; }
  bool is_false() const { return root_ == kFalse; }

  /// Value under a full assignment indexed by variable.
  bool evaluate(std::span<const uint8_t> assignment) const;
  /// Weighted model count under a fully factorized prior, prior[var] = Pr(var=1).
  double wmc(std::span<const double> prior) const;
  /// Number of satisfying assignments over all num_vars() variables.
  double model_count() const;

  /// Graphviz rendering; `names[var]` labels decision nodes when given.
  std::string to_dot(std::span<const std::string> names = {}, const std::string& graph_name = "obdd") const;

  friend bool operator==(const Obdd&, const Obdd&) = default;

private:
  std::vector<std::size_t> order_;
  std::vector<BddNode> nodes_;
  NodeId root_;
};

Obdd obdd_and(const Obdd& a, const Obdd& b);
Obdd obdd_or(const Obdd& a, const Obdd& b);
Obdd obdd_not(const Obdd& a);

}  // namespace focs
