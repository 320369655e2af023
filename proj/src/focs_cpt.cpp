#include "focs/focs_cpt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "focs/error.hpp"

namespace focs {

void check_tiling(std::span<const Context> contexts) {
  if (contexts.empty()) throw ValidationError("a FoCS CPT needs at least one context");
  if (contexts.front().lo != -kInf) throw ValidationError("first context must start at -inf");
  if (contexts.back().hi != kInf) throw ValidationError("last context must end at +inf");
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (!(contexts[i].lo < contexts[i].hi)) throw ValidationError("context " + std::to_string(i) + " is empty");
    if (i > 0 && contexts[i].lo != contexts[i - 1].hi)
      throw ValidationError("contexts " + std::to_string(i - 1) + " and " + std::to_string(i) + " do not tile");
  }
}

FoCSCpt::FoCSCpt(Scorer scorer, std::vector<Context> contexts, std::vector<CptColumn> columns, std::string child,
                 std::vector<std::string> parents)
    : scorer_(std::move(scorer)),
      contexts_(std::move(contexts)),
      columns_(std::move(columns)),
      child_(std::move(child)),
      parents_(std::move(parents)) {
  check_tiling(contexts_);
  if (columns_.size() != contexts_.size()) throw ValidationError("one column per context is required");
  for (const auto& c : columns_) {
    if (!(c.p1 > 0.0 && c.p1 < 1.0)) throw ValidationError("CPT column probabilities must lie in (0,1)");
  }
  if (!parents_.empty() && parents_.size() != arity(scorer_))
    throw ValidationError("scorer arity does not match the number of parents");
}

std::size_t FoCSCpt::locate(double f) const {
  // First interval whose upper end is >= f; tiling makes it the unique match.
  auto it = std::lower_bound(contexts_.begin(), contexts_.end(), f,
                             [](const Context& c, double v) { return c.hi < v; });
  return static_cast<std::size_t>(it - contexts_.begin());
}

namespace {

std::size_t locate_in(std::span<const Context> contexts, double f) {
  auto it = std::lower_bound(contexts.begin(), contexts.end(), f, [](const Context& c, double v) { return c.hi < v; });
  return static_cast<std::size_t>(it - contexts.begin());
}

void check_aligned(const FamilyView& view, std::span<const double> scores) {
  if (scores.size() != view.size()) throw std::invalid_argument("scores are not aligned with the dataset records");
}

double cll_from_scores(const FamilyView& view, std::span<const double> scores, std::span<const Context> contexts,
                       std::span<const CptColumn> columns) {
  double total = 0.0;
  for (std::size_t r = 0; r < view.size(); ++r) {
    const CptColumn& col = columns[locate_in(contexts, scores[r])];
    total += double(view.weight(r)) * std::log(col.probability(view.child_value(r)));
  }
  return total;
}

}  // namespace

std::vector<CptColumn> estimate_columns(const FamilyView& view, std::span<const double> scores,
                                        std::span<const Context> contexts) {
  check_tiling(contexts);
  check_aligned(view, scores);
  std::vector<double> ones(contexts.size(), 0.0), total(contexts.size(), 0.0);
  for (std::size_t r = 0; r < view.size(); ++r) {
    std::size_t c = locate_in(contexts, scores[r]);
    double w = double(view.weight(r));
    total[c] += w;
    if (view.child_value(r)) ones[c] += w;
  }
  std::vector<CptColumn> cols(contexts.size());
  for (std::size_t c = 0; c < contexts.size(); ++c) cols[c].p1 = smoothed_p1(ones[c], total[c]);
  return cols;
}

std::vector<CptColumn> estimate_columns(const FamilyView& view, const Scorer& scorer,
                                        std::span<const Context> contexts) {
  auto f = scores(scorer, view);
  return estimate_columns(view, f, contexts);
}

double cll(const FamilyView& view, const FoCSCpt& cpt) {
  double total = 0.0;
  for (std::size_t r = 0; r < view.size(); ++r) {
    CptColumn col = cpt.predict(view.parent_values(r));
    total += double(view.weight(r)) * std::log(col.probability(view.child_value(r)));
  }
  return total;
}

std::optional<ThresholdSplit> learn_threshold(const FamilyView& view, std::span<const double> scores,
                                              const Context& within) {
  check_aligned(view, scores);
  std::vector<std::size_t> members;
  for (std::size_t r = 0; r < view.size(); ++r) {
    if (within.contains(scores[r])) members.push_back(r);
  }
  if (members.empty()) return std::nullopt;
  std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double ones = 0.0, total = 0.0;
  for (std::size_t r : members) {
    double w = double(view.weight(r));
    total += w;
    if (view.child_value(r)) ones += w;
  }
  if (ones == 0.0 || ones == total) return std::nullopt;
  if (scores[members.front()] == scores[members.back()]) return std::nullopt;

  const double base = smoothed_cll(ones, total);
  const double tolerance = 1e-12 * std::max(1.0, std::abs(base));
  std::optional<ThresholdSplit> best;
  double left_ones = 0.0, left_total = 0.0;
  // Candidate cut after each run of equal scores, except the last run
  // (cutting there leaves the upper side empty, i.e. no split).
  for (std::size_t i = 0; i < members.size(); ++i) {
    std::size_t r = members[i];
    double w = double(view.weight(r));
    left_total += w;
    if (view.child_value(r)) left_ones += w;
    bool run_ends = i + 1 < members.size() && scores[members[i + 1]] != scores[r];
    if (!run_ends) continue;
    double split = smoothed_cll(left_ones, left_total) + smoothed_cll(ones - left_ones, total - left_total);
    double gain = split - base;
    if (gain > tolerance && (!best || gain > best->gain)) best = ThresholdSplit{scores[r], gain};
  }
  return best;
}

std::optional<ThresholdSplit> learn_threshold(const FamilyView& view, const Scorer& scorer, const Context& within) {
  auto f = scores(scorer, view);
  return learn_threshold(view, f, within);
}

FoCSCpt learn_focs(const FamilyView& view, const Scorer& scorer, const LearnOptions& opts,
                   const FamilyView* validation) {
  return learn_focs(view, scorer, opts, validation, nullptr);
}

FoCSCpt learn_focs(const FamilyView& view, const Scorer& scorer, const LearnOptions& opts,
                   const FamilyView* validation, LearnTrace* trace) {
  if (opts.max_contexts < 1) throw ValidationError("max_contexts must be >= 1");
  if (arity(scorer) != view.arity()) throw ValidationError("scorer arity does not match the family");

  const auto train_scores = scores(scorer, view);
  std::vector<double> val_scores;
  double val_weight = 0.0;
  if (validation) {
    if (validation->arity() != view.arity()) throw ValidationError("validation family has the wrong arity");
    val_scores = scores(scorer, *validation);
    val_weight = double(validation->total_weight());
  }

  std::vector<Context> contexts{Context{}};
  auto columns = estimate_columns(view, train_scores, contexts);
  std::vector<std::optional<ThresholdSplit>> candidates{learn_threshold(view, train_scores, contexts[0])};
  if (trace) trace->train_cll = {cll_from_scores(view, train_scores, contexts, columns)};

  double val_cll = 0.0;
  if (validation && val_weight > 0)
    val_cll = cll_from_scores(*validation, val_scores, contexts, columns) / val_weight;

  while (contexts.size() < opts.max_contexts) {
    std::size_t pick = contexts.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!candidates[i]) continue;
      if (pick == contexts.size() || candidates[i]->gain > candidates[pick]->gain ||
          (candidates[i]->gain == candidates[pick]->gain && candidates[i]->threshold < candidates[pick]->threshold))
        pick = i;
    }
    if (pick == contexts.size()) break;

    const double t = candidates[pick]->threshold;
    std::vector<Context> next = contexts;
    next[pick] = Context{contexts[pick].lo, t};
    next.insert(next.begin() + std::ptrdiff_t(pick) + 1, Context{t, contexts[pick].hi});
    auto next_columns = estimate_columns(view, train_scores, next);

    double improvement;
    double next_val = 0.0;
    if (validation && val_weight > 0) {
      next_val = cll_from_scores(*validation, val_scores, next, next_columns) / val_weight;
      improvement = next_val - val_cll;
    } else {
      improvement = candidates[pick]->gain / double(view.total_weight());
    }
    if (improvement < opts.min_gain) break;

    contexts = std::move(next);
    columns = std::move(next_columns);
    val_cll = next_val;
    candidates[pick] = learn_threshold(view, train_scores, contexts[pick]);
    candidates.insert(candidates.begin() + std::ptrdiff_t(pick) + 1,
                      learn_threshold(view, train_scores, contexts[pick + 1]));
    if (trace) trace->train_cll.push_back(cll_from_scores(view, train_scores, contexts, columns));
  }

  return FoCSCpt(scorer, std::move(contexts), std::move(columns), view.child_name(), view.parent_names());
}

nlohmann::json bound_to_json(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  return v;
}

double bound_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ValidationError("bad interval bound '" + s + "'");
  }
  return j.get<double>();
}

nlohmann::json to_json(const FoCSCpt& cpt) {
  nlohmann::json ctx = nlohmann::json::array();
  for (std::size_t i = 0; i < cpt.size(); ++i) {
    ctx.push_back({{"lo", bound_to_json(cpt.contexts()[i].lo)},
                   {"hi", bound_to_json(cpt.contexts()[i].hi)},
                   {"p1", cpt.columns()[i].p1}});
  }
  return {{"scorer", to_json(cpt.scorer())}, {"contexts", ctx}, {"child", cpt.child()}, {"parents", cpt.parents()}};
}

FoCSCpt focs_from_json(const nlohmann::json& j) {
  try {
    Scorer scorer = scorer_from_json(j.at("scorer"));
    std::vector<Context> contexts;
    std::vector<CptColumn> columns;
    for (const auto& c : j.at("contexts")) {
      contexts.push_back(Context{bound_from_json(c.at("lo")), bound_from_json(c.at("hi"))});
      columns.push_back(CptColumn{c.at("p1").get<double>()});
    }
    return FoCSCpt(std::move(scorer), std::move(contexts), std::move(columns), j.value("child", std::string{}),
                   j.value("parents", std::vector<std::string>{}));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed FoCS model JSON: ") + e.what());
  }
}

}  // namespace focs
