#include "focs/compile.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>

#include "focs/error.hpp"

namespace focs {

bool LinearThreshold::test(std::span<const uint8_t> u) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * u[i];
  return acc >= threshold;
}

std::vector<std::size_t> descending_weight_order(std::span<const double> weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(weights[a]) > std::abs(weights[b]); });
  return order;
}

namespace {

/// OBDD of pred(start + sum of coef[var] over true variables), for a
/// predicate that is non-decreasing in the sum. The sum is accumulated in the
/// manager's level order, so leaf tests see the same floating-point value as
/// a forward pass that adds terms in that order.
NodeId build_monotone(BddManager& m, std::span<const double> coef_by_var, double start,
                      const std::function<bool(double)>& pred) {
  const std::size_t n = m.num_vars();
  std::vector<double> coef(n), min_rest(n + 1, 0.0), max_rest(n + 1, 0.0);
  double scale = std::abs(start) + 1.0;
  for (std::size_t l = 0; l < n; ++l) coef[l] = coef_by_var[m.order()[l]];
  for (std::size_t l = n; l-- > 0;) {
    min_rest[l] = min_rest[l + 1] + std::min(0.0, coef[l]);
    max_rest[l] = max_rest[l + 1] + std::max(0.0, coef[l]);
    scale += std::abs(coef[l]);
  }
  // Pruning tests are widened by a rounding margin; only the exact leaf test
  // decides borderline sums.
  const double slack = 1e-9 * scale;

  struct MemoKey {
    std::size_t level;
    uint64_t bits;
    bool operator==(const MemoKey&) const = default;
  };
  struct MemoHash {
    std::size_t operator()(const MemoKey& k) const noexcept {
      return std::hash<uint64_t>{}(k.bits ^ (uint64_t(k.level) * 0x9e3779b97f4a7c15ULL));
    }
  };
  std::unordered_map<MemoKey, NodeId, MemoHash> memo;

  std::function<NodeId(std::size_t, double)> rec = [&](std::size_t level, double partial) -> NodeId {
    if (level == n) return pred(partial) ? kTrue : kFalse;
    if (pred(partial + min_rest[level] - slack)) return kTrue;
    if (!pred(partial + max_rest[level] + slack)) return kFalse;
    MemoKey key{level, std::bit_cast<uint64_t>(partial)};
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    NodeId lo = rec(level + 1, partial);
    NodeId hi = rec(level + 1, partial + coef[level] * 1.0);
    NodeId r = m.make(static_cast<uint32_t>(level), lo, hi);
    memo.emplace(key, r);
    return r;
  };
  return rec(0, start);
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

}  // namespace

Obdd compile_threshold(const LinearThreshold& lt, std::vector<std::size_t> order, std::size_t node_budget) {
  if (order.size() != lt.weights.size()) throw ValidationError("variable order must cover every input");
  for (double w : lt.weights) {
    if (!std::isfinite(w)) throw ValidationError("threshold weights must be finite");
  }
  BddManager m(std::move(order), node_budget);
  const double t = lt.threshold;
  NodeId root = build_monotone(m, lt.weights, 0.0, [t](double s) { return s >= t; });
  return m.freeze(root);
}

Obdd compile_threshold(const LinearThreshold& lt) {
  return compile_threshold(lt, descending_weight_order(lt.weights));
}

Obdd compile_step_network(const StepNetwork& net, const Context& interval, std::size_t node_budget) {
  if (!net.single_hidden_layer()) throw ValidationError("OBDD compilation needs a single hidden layer");
  if (!(interval.lo < interval.hi)) throw ValidationError("empty output interval");
  const Layer& hidden = net.layers()[0];
  const Layer& out = net.layers()[1];

  BddManager inputs(identity_order(hidden.inputs), node_budget);
  std::vector<NodeId> units(hidden.outputs);
  for (std::size_t j = 0; j < hidden.outputs; ++j) {
    std::span<const double> row(hidden.weights.data() + j * hidden.inputs, hidden.inputs);
    units[j] = build_monotone(inputs, row, hidden.bias[j], [](double s) { return s >= 0.0; });
  }

  // Interval test over the hidden units: (o > lo) and not (o > hi).
  BddManager over_hidden(identity_order(hidden.outputs), node_budget);
  const double lo = interval.lo, hi = interval.hi;
  NodeId above_lo = build_monotone(over_hidden, out.weights, out.bias[0],
                                   [&](double o) { return net.transform(o) > lo; });
  NodeId above_hi = build_monotone(over_hidden, out.weights, out.bias[0],
                                   [&](double o) { return net.transform(o) > hi; });
  NodeId in_interval = over_hidden.conjoin(above_lo, over_hidden.negate(above_hi));

  NodeId root = inputs.compose(over_hidden.freeze(in_interval), units);
  return inputs.freeze(root);
}

Obdd compile_context(const FoCSCpt& cpt, std::size_t i, std::size_t node_budget) {
  const auto* net = std::get_if<StepNetwork>(&cpt.scorer());
  if (!net) throw ValidationError("context compilation needs a step-network scorer (convert with to_step)");
  if (i >= cpt.size()) throw ValidationError("context index out of range");
  return compile_step_network(*net, cpt.contexts()[i], node_budget);
}

std::vector<Obdd> compile_contexts(const FoCSCpt& cpt, std::size_t node_budget) {
  std::vector<Obdd> out;
  for (std::size_t i = 0; i < cpt.size(); ++i) out.push_back(compile_context(cpt, i, node_budget));
  return out;
}

Marginal marginal(const FoCSCpt& cpt, std::span<const Obdd> contexts, std::span<const double> prior) {
  if (contexts.size() != cpt.size()) throw std::invalid_argument("one OBDD per context is required");
  Marginal result;
  for (std::size_t i = 0; i < cpt.size(); ++i) {
    double mass = contexts[i].wmc(prior);
    result.masses.push_back(mass);
    result.p1 += cpt.columns()[i].p1 * mass;
  }
  return result;
}

Marginal marginal(const FoCSCpt& cpt, std::span<const double> prior) {
  auto contexts = compile_contexts(cpt);
  return marginal(cpt, contexts, prior);
}

}  // namespace focs
