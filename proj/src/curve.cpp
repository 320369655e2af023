#include "focs/curve.hpp"

#include <cmath>

#include "focs/error.hpp"
#include "focs/focs_cpt.hpp"
#include "focs/tree_cpt.hpp"

namespace focs {

double negated_cll_per_record(double cll, const FamilyView& view) {
  return -cll / double(view.total_weight());
}

double mlp_cll(const FamilyView& view, const Mlp& mlp) {
  double total = 0.0;
  for (std::size_t r = 0; r < view.size(); ++r) {
    double p1 = mlp.eval(view.parent_values(r));
    total += double(view.weight(r)) * std::log(view.child_value(r) ? p1 : 1.0 - p1);
  }
  return total;
}

std::vector<CurveRow> contexts_curve(const FamilyView& train, const FamilyView& eval, const Mlp& mlp,
                                     std::size_t max_contexts, bool step_scorer) {
  if (max_contexts < 1) throw ValidationError("curve needs at least one context");
  Scorer scorer = step_scorer ? Scorer{to_step(mlp)} : Scorer{mlp};
  const double mlp_ncll = negated_cll_per_record(mlp_cll(eval, mlp), eval);

  std::vector<TreeCpt> trees;
  for (std::size_t d = 0; d <= train.arity(); ++d) {
    TreeCpt t = learn_tree(train, d);
    std::size_t leaves = leaf_count(t);
    if (leaves > max_contexts) break;
    bool grew = trees.empty() || leaves > leaf_count(trees.back());
    trees.push_back(std::move(t));
    if (!grew) break;
  }

  std::vector<CurveRow> rows;
  for (std::size_t c = 1; c <= max_contexts; ++c) {
    LearnOptions opts;
    opts.max_contexts = c;
    opts.min_gain = -kInf;
    FoCSCpt cpt = learn_focs(train, scorer, opts);
    const TreeCpt* tree = &trees.front();
    for (const auto& t : trees) {
      if (leaf_count(t) <= c) tree = &t;
    }
    CurveRow row;
    row.contexts = c;
    row.focs_contexts = cpt.size();
    row.focs_ncll = negated_cll_per_record(cll(eval, cpt), eval);
    row.tree_leaves = leaf_count(*tree);
    row.tree_ncll = negated_cll_per_record(tree_cll(eval, *tree), eval);
    row.mlp_ncll = mlp_ncll;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace focs
