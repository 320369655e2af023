#include "focs/obdd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "focs/error.hpp"

namespace focs {

BddManager::BddManager(std::vector<std::size_t> order, std::size_t node_budget)
    : order_(std::move(order)), level_of_(order_.size()), budget_(node_budget) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t l = 0; l < order_.size(); ++l) {
    if (order_[l] >= order_.size() || seen[order_[l]])
      throw ValidationError("variable order must be a permutation of 0..n-1");
    seen[order_[l]] = true;
    level_of_[order_[l]] = l;
  }
  const auto terminal_level = static_cast<uint32_t>(order_.size());
  nodes_.push_back({terminal_level, kFalse, kFalse});
  nodes_.push_back({terminal_level, kTrue, kTrue});
}

NodeId BddManager::make(uint32_t level, NodeId lo, NodeId hi) {
  if (lo == hi) return lo;
  Key key{(uint64_t(level) << 32) | lo, hi};
  auto it = unique_.find(key);
  if (it != unique_.end()) return it->second;
  if (nodes_.size() >= budget_)
    throw BudgetExceeded("OBDD node budget of " + std::to_string(budget_) + " nodes exceeded");
  auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back({level, lo, hi});
  unique_.emplace(key, id);
  return id;
}

NodeId BddManager::var(std::size_t variable) {
  return make(static_cast<uint32_t>(level_of(variable)), kFalse, kTrue);
}

NodeId BddManager::cofactor(NodeId f, uint32_t level, bool value) const {
  const BddNode& n = nodes_[f];
  if (n.level != level) return f;
  return value ? n.hi : n.lo;
}

NodeId BddManager::ite(NodeId f, NodeId g, NodeId h) {
  if (f == kTrue) return g;
  if (f == kFalse) return h;
  if (g == h) return g;
  if (g == kTrue && h == kFalse) return f;
  Key key{(uint64_t(f) << 32) | g, h};
  auto it = ite_cache_.find(key);
  if (it != ite_cache_.end()) return it->second;
  uint32_t level = std::min({top_level(f), top_level(g), top_level(h)});
  NodeId lo = ite(cofactor(f, level, false), cofactor(g, level, false), cofactor(h, level, false));
  NodeId hi = ite(cofactor(f, level, true), cofactor(g, level, true), cofactor(h, level, true));
  NodeId r = make(level, lo, hi);
  ite_cache_.emplace(key, r);
  return r;
}

NodeId BddManager::compose(const Obdd& source, std::span<const NodeId> replacement) {
  if (replacement.size() != source.num_vars())
    throw std::invalid_argument("compose needs one replacement per source level");
  const auto& src = source.nodes();
  std::vector<NodeId> mapped(src.size());
  mapped[kFalse] = kFalse;
  mapped[kTrue] = kTrue;
  // Post-order numbering: children precede parents.
  for (std::size_t i = 2; i < src.size(); ++i) {
    const BddNode& n = src[i];
    mapped[i] = ite(replacement[n.level], mapped[n.hi], mapped[n.lo]);
  }
  return mapped[source.root()];
}

NodeId BddManager::from_function(const std::function<bool(std::span<const uint8_t>)>& fn) {
  std::vector<uint8_t> assignment(num_vars(), 0);
  std::function<NodeId(uint32_t)> rec = [&](uint32_t level) -> NodeId {
    if (level == num_vars()) return fn(assignment) ? kTrue : kFalse;
    std::size_t v = order_[level];
    assignment[v] = 0;
    NodeId lo = rec(level + 1);
    assignment[v] = 1;
    NodeId hi = rec(level + 1);
    assignment[v] = 0;
    return make(level, lo, hi);
  };
  return rec(0);
}

Obdd BddManager::freeze(NodeId root) const {
  const auto terminal_level = static_cast<uint32_t>(num_vars());
  std::vector<BddNode> out{{terminal_level, kFalse, kFalse}, {terminal_level, kTrue, kTrue}};
  std::unordered_map<NodeId, NodeId> renumber{{kFalse, kFalse}, {kTrue, kTrue}};
  // Iterative post-order so deep diagrams do not exhaust the stack.
  std::vector<std::pair<NodeId, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    if (renumber.count(id)) continue;
    const BddNode& n = nodes_[id];
    if (!expanded) {
      stack.push_back({id, true});
      stack.push_back({n.hi, false});
      stack.push_back({n.lo, false});
    } else {
      auto nid = static_cast<NodeId>(out.size());
      out.push_back({n.level, renumber.at(n.lo), renumber.at(n.hi)});
      renumber.emplace(id, nid);
    }
  }
  return Obdd(order_, std::move(out), renumber.at(root));
}

NodeId BddManager::import(const Obdd& d) {
  if (d.order() != order_) throw std::invalid_argument("cannot import an OBDD built under a different order");
  std::vector<NodeId> mapped(d.nodes().size());
  mapped[kFalse] = kFalse;
  mapped[kTrue] = kTrue;
  for (std::size_t i = 2; i < d.nodes().size(); ++i) {
    const BddNode& n = d.nodes()[i];
    mapped[i] = make(n.level, mapped[n.lo], mapped[n.hi]);
  }
  return mapped[d.root()];
}

Obdd::Obdd(std::vector<std::size_t> order, std::vector<BddNode> nodes, NodeId root)
    : order_(std::move(order)), nodes_(std::move(nodes)), root_(root) {
  if (nodes_.size() < 2 || root_ >= nodes_.size()) throw std::invalid_argument("malformed OBDD node table");
}

Obdd Obdd::constant(bool value, std::vector<std::size_t> order) {
  BddManager m(std::move(order));
  return m.freeze(value ? kTrue : kFalse);
}

bool Obdd::evaluate(std::span<const uint8_t> assignment) const {
  NodeId id = root_;
  while (id > kTrue) {
    const BddNode& n = nodes_[id];
    id = assignment[order_[n.level]] ? n.hi : n.lo;
  }
  return id == kTrue;
}

double Obdd::wmc(std::span<const double> prior) const {
  if (prior.size() != order_.size()) throw std::invalid_argument("prior must give one probability per variable");
  for (double p : prior) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prior probabilities must lie in [0,1]");
  }
  // Skipped levels sum out to a factor of 1.
  std::vector<double> value(nodes_.size());
  value[kFalse] = 0.0;
  value[kTrue] = 1.0;
  for (std::size_t i = 2; i < nodes_.size(); ++i) {
    const BddNode& n = nodes_[i];
    double p = prior[order_[n.level]];
    value[i] = p * value[n.hi] + (1.0 - p) * value[n.lo];
  }
  return value[root_];
}

double Obdd::model_count() const {
  std::vector<double> value(nodes_.size());
  value[kFalse] = 0.0;
  value[kTrue] = 1.0;
  // value[i] counts models over the variables at levels >= the node's level.
  auto scaled = [&](NodeId child, uint32_t from_level) {
    return value[child] * std::ldexp(1.0, int(nodes_[child].level) - int(from_level) - 1);
  };
  for (std::size_t i = 2; i < nodes_.size(); ++i) {
    const BddNode& b = nodes_[i];
    value[i] = scaled(b.lo, b.level) + scaled(b.hi, b.level);
  }
  return value[root_] * std::ldexp(1.0, int(nodes_[root_].level));
}

std::string Obdd::to_dot(std::span<const std::string> names, const std::string& graph_name) const {
  std::ostringstream out;
  out << "digraph " << graph_name << " {\n";
  out << "  n0 [shape=box,label=\"0\"];\n  n1 [shape=box,label=\"1\"];\n";
  for (std::size_t i = 2; i < nodes_.size(); ++i) {
    std::size_t v = order_[nodes_[i].level];
    std::string label = v < names.size() ? names[v] : "x" + std::to_string(v);
    out << "  n" << i << " [label=\"" << label << "\"];\n";
    out << "  n" << i << " -> n" << nodes_[i].lo << " [style=dashed];\n";
    out << "  n" << i << " -> n" << nodes_[i].hi << ";\n";
  }
  out << "  root [shape=point];\n  root -> n" << root_ << ";\n}\n";
  return out.str();
}

namespace {

template <typename Op>
Obdd combine(const Obdd& a, const Obdd& b, Op op) {
  if (a.order() != b.order()) throw std::invalid_argument("OBDDs must share a variable order");
  BddManager m(a.order());
  NodeId ra = m.import(a);
  NodeId rb = m.import(b);
  return m.freeze(op(m, ra, rb));
}

}  // namespace

Obdd obdd_and(const Obdd& a, const Obdd& b) {
  return combine(a, b, [](BddManager& m, NodeId x, NodeId y) { return m.conjoin(x, y); });
}

Obdd obdd_or(const Obdd& a, const Obdd& b) {
  return combine(a, b, [](BddManager& m, NodeId x, NodeId y) { return m.disjoin(x, y); });
}

Obdd obdd_not(const Obdd& a) {
  BddManager m(a.order());
  return m.freeze(m.negate(m.import(a)));
}

}  // namespace focs
