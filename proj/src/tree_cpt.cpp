#include "focs/tree_cpt.hpp"

#include <cmath>
#include <functional>

#include "focs/error.hpp"
#include "focs/numeric.hpp"

namespace focs {

namespace {

struct Counts {
  double ones = 0.0;
  double total = 0.0;
};

Counts counts_of(const FamilyView& view, std::span<const std::size_t> rows) {
  Counts c;
  for (std::size_t r : rows) {
    double w = double(view.weight(r));
    c.total += w;
    if (view.child_value(r)) c.ones += w;
  }
  return c;
}

std::unique_ptr<TreeCpt::Node> grow(const FamilyView& view, std::vector<std::size_t> rows, std::vector<bool>& used,
                                    std::size_t depth_left) {
  auto node = std::make_unique<TreeCpt::Node>();
  Counts here = counts_of(view, rows);
  node->column.p1 = smoothed_p1(here.ones, here.total);
  if (depth_left == 0 || here.ones == 0.0 || here.ones == here.total) return node;

  const double base = smoothed_cll(here.ones, here.total);
  const double tolerance = 1e-12 * std::max(1.0, std::abs(base));
  int best_var = -1;
  double best_gain = 0.0;
  for (std::size_t v = 0; v < view.arity(); ++v) {
    if (used[v]) continue;
    Counts side[2];
    for (std::size_t r : rows) {
      Counts& c = side[view.parent_values(r)[v]];
      double w = double(view.weight(r));
      c.total += w;
      if (view.child_value(r)) c.ones += w;
    }
    if (side[0].total == 0.0 || side[1].total == 0.0) continue;
    double gain = smoothed_cll(side[0].ones, side[0].total) + smoothed_cll(side[1].ones, side[1].total) - base;
    // Gains within rounding of zero count as zero so ties resolve by index.
    if (std::abs(gain) <= tolerance) gain = 0.0;
    if (gain < 0.0) continue;
    if (best_var < 0 || gain > best_gain) {
      best_var = int(v);
      best_gain = gain;
    }
  }
  if (best_var < 0) return node;

  std::vector<std::size_t> lo_rows, hi_rows;
  for (std::size_t r : rows) (view.parent_values(r)[std::size_t(best_var)] ? hi_rows : lo_rows).push_back(r);
  node->var = best_var;
  used[std::size_t(best_var)] = true;
  node->lo = grow(view, std::move(lo_rows), used, depth_left - 1);
  node->hi = grow(view, std::move(hi_rows), used, depth_left - 1);
  used[std::size_t(best_var)] = false;
  return node;
}

}  // namespace

TreeCpt::TreeCpt(std::unique_ptr<Node> root, std::size_t max_depth, std::size_t arity)
    : root_(std::move(root)), max_depth_(max_depth), arity_(arity) {
  if (!root_) throw ValidationError("tree CPT needs a root");
}

TreeCpt learn_tree(const FamilyView& view, std::size_t max_depth) {
  std::vector<std::size_t> rows(view.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  std::vector<bool> used(view.arity(), false);
  return TreeCpt(grow(view, std::move(rows), used, max_depth), max_depth, view.arity());
}

CptColumn tree_predict(const TreeCpt& tree, std::span<const uint8_t> u) {
  const TreeCpt::Node* n = &tree.root();
  while (!n->is_leaf()) n = u[std::size_t(n->var)] ? n->hi.get() : n->lo.get();
  return n->column;
}

double tree_cll(const FamilyView& view, const TreeCpt& tree) {
  double total = 0.0;
  for (std::size_t r = 0; r < view.size(); ++r) {
    CptColumn col = tree_predict(tree, view.parent_values(r));
    total += double(view.weight(r)) * std::log(col.probability(view.child_value(r)));
  }
  return total;
}

std::size_t leaf_count(const TreeCpt& tree) {
  std::function<std::size_t(const TreeCpt::Node&)> rec = [&](const TreeCpt::Node& n) -> std::size_t {
    return n.is_leaf() ? 1 : rec(*n.lo) + rec(*n.hi);
  };
  return rec(tree.root());
}

std::size_t depth(const TreeCpt& tree) {
  std::function<std::size_t(const TreeCpt::Node&)> rec = [&](const TreeCpt::Node& n) -> std::size_t {
    return n.is_leaf() ? 0 : 1 + std::max(rec(*n.lo), rec(*n.hi));
  };
  return rec(tree.root());
}

namespace {

nlohmann::json node_json(const TreeCpt::Node& n) {
  if (n.is_leaf()) return {{"p1", n.column.p1}};
  return {{"var", n.var}, {"lo", node_json(*n.lo)}, {"hi", node_json(*n.hi)}};
}

std::unique_ptr<TreeCpt::Node> node_from_json(const nlohmann::json& j, std::size_t arity) {
  auto n = std::make_unique<TreeCpt::Node>();
  if (j.contains("p1")) {
    n->column.p1 = j.at("p1").get<double>();
    if (!(n->column.p1 > 0.0 && n->column.p1 < 1.0)) throw ValidationError("tree leaf p1 must lie in (0,1)");
    return n;
  }
  n->var = j.at("var").get<int>();
  if (n->var < 0 || std::size_t(n->var) >= arity) throw ValidationError("tree split variable out of range");
  n->lo = node_from_json(j.at("lo"), arity);
  n->hi = node_from_json(j.at("hi"), arity);
  return n;
}

}  // namespace

nlohmann::json to_json(const TreeCpt& tree) {
  return {{"tree", node_json(tree.root())}, {"max_depth", tree.max_depth()}, {"arity", tree.arity()}};
}

TreeCpt tree_from_json(const nlohmann::json& j) {
  try {
    std::size_t arity = j.at("arity").get<std::size_t>();
    return TreeCpt(node_from_json(j.at("tree"), arity), j.value("max_depth", std::size_t{0}), arity);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tree model JSON: ") + e.what());
  }
}

}  // namespace focs
