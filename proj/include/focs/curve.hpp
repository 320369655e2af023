#pragma once

#include <vector>

#include "focs/data.hpp"
#include "focs/mlp.hpp"

namespace focs {

/// Negated CLL per record of each representation at a given context budget.
struct CurveRow {
  std::size_t contexts = 0;
  double focs_ncll = 0;
  double tree_ncll = 0;
  double mlp_ncll = 0;
  std::size_t focs_contexts = 0;  // contexts actually found (may stop early)
  std::size_t tree_leaves = 0;
};

/// Rows for context budgets 1..max_contexts. The FoCS CPT at budget c is the
/// greedy model with at most c contexts; the tree is the deepest depth-bounded
/// tree with at most c leaves. Scores are measured on `eval`.
std::vector<CurveRow> contexts_curve(const FamilyView& train, const FamilyView& eval, const Mlp& mlp,
                                     std::size_t max_contexts, bool step_scorer = false);

double negated_cll_per_record(double cll, const FamilyView& view);
double mlp_cll(const FamilyView& view, const Mlp& mlp);

}  // namespace focs
