#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "focs/data.hpp"
#include "focs/mlp.hpp"
#include "focs/numeric.hpp"

namespace focs {

/// Half-open interval (lo, hi] over scorer outputs.
struct Context {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double f) const { return lo < f && f <= hi; }
  friend bool operator==(const Context&, const Context&) = default;
};

/// Distribution over a binary child: Pr(x=1) = p1.
struct CptColumn {
  double p1 = 0.5;

  double probability(uint8_t x) const { return x ? p1 : 1.0 - p1; }
  friend bool operator==(const CptColumn&, const CptColumn&) = default;
};

/// Throws ValidationError unless the intervals are sorted and tile (-inf, +inf].
void check_tiling(std::span<const Context> contexts);

/// Functional context-specific CPT: the scorer's output range is cut into
/// intervals, each carrying its own column.
class FoCSCpt {
public:
  FoCSCpt(Scorer scorer, std::vector<Context> contexts, std::vector<CptColumn> columns, std::string child,
          std::vector<std::string> parents);

  const Scorer& scorer() const noexcept { return scorer_; }
  const std::vector<Context>& contexts() const noexcept { return contexts_; }
  const std::vector<CptColumn>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return contexts_.size(); }
  const std::string& child() const noexcept { return child_; }
  const std::vector<std::string>& parents() const noexcept { return parents_; }

  /// Index of the unique context containing scorer value f.
  std::size_t locate(double f) const;
  std::size_t context_of(std::span<const uint8_t> u) const { return locate(score(scorer_, u)); }

  /// Pr(X | u).
  CptColumn predict(std::span<const uint8_t> u) const { return columns_[context_of(u)]; }

private:
  Scorer scorer_;
  std::vector<Context> contexts_;
  std::vector<CptColumn> columns_;
  std::string child_;
  std::vector<std::string> parents_;
};

/// Add-one smoothed columns, one per context, from a single pass over
/// precomputed scores (aligned with the view's records).
std::vector<CptColumn> estimate_columns(const FamilyView& view, std::span<const double> scores,
                                        std::span<const Context> contexts);
std::vector<CptColumn> estimate_columns(const FamilyView& view, const Scorer& scorer,
                                        std::span<const Context> contexts);

/// Sum over records of weight * ln Pr(x | u) under the CPT.
double cll(const FamilyView& view, const FoCSCpt& cpt);

struct ThresholdSplit {
  double threshold;
  double gain;  // smoothed training-CLL improvement over the unsplit context
};

/// Best single threshold inside `within`, or nullopt when no split strictly
/// improves the smoothed CLL. The threshold sits exactly on the largest score
/// of the lower side, so the pieces are (lo, T] and (T, hi].
std::optional<ThresholdSplit> learn_threshold(const FamilyView& view, std::span<const double> scores,
                                              const Context& within);
std::optional<ThresholdSplit> learn_threshold(const FamilyView& view, const Scorer& scorer, const Context& within);

struct LearnOptions {
  std::size_t max_contexts = 2;
  /// Minimum improvement in per-record validation CLL (or training CLL when
  /// no validation set is given) required to accept a split.
  double min_gain = 0.0;
};

/// Greedy refinement: repeatedly applies the best-gain split over all
/// current contexts until max_contexts, no split, or insufficient gain.
FoCSCpt learn_focs(const FamilyView& view, const Scorer& scorer, const LearnOptions& opts,
                   const FamilyView* validation = nullptr);

/// Training CLL after each accepted split (entry 0 is the single-context CLL).
struct LearnTrace {
  std::vector<double> train_cll;
};
FoCSCpt learn_focs(const FamilyView& view, const Scorer& scorer, const LearnOptions& opts,
                   const FamilyView* validation, LearnTrace* trace);

nlohmann::json to_json(const FoCSCpt& cpt);
FoCSCpt focs_from_json(const nlohmann::json& j);

/// JSON encoding of interval endpoints: finite numbers, or "-inf"/"+inf".
nlohmann::json bound_to_json(double v);
double bound_from_json(const nlohmann::json& j);

}  // namespace focs
