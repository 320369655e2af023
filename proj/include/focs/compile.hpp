#pragma once

#include <span>
#include <vector>

#include "focs/focs_cpt.hpp"
#include "focs/mlp.hpp"
#include "focs/obdd.hpp"

namespace focs {

/// Boolean unit: sum_i weights[i] * u_i >= threshold.
struct LinearThreshold {
  std::vector<double> weights;
  double threshold = 0.0;

  bool test(std::span<const uint8_t> u) const;
};

/// Inputs sorted by descending |weight| (ties by index).
std::vector<std::size_t> descending_weight_order(std::span<const double> weights);

/// Exact OBDD of a linear threshold unit. Partial sums are accumulated along
/// `order`; a branch is cut to a sink once every completion agrees.
Obdd compile_threshold(const LinearThreshold& lt, std::vector<std::size_t> order,
                       std::size_t node_budget = kDefaultNodeBudget);
Obdd compile_threshold(const LinearThreshold& lt);

/// OBDD over the network inputs (family order) of "scorer output in (lo, hi]".
/// Requires a single hidden layer.
Obdd compile_step_network(const StepNetwork& net, const Context& interval,
                          std::size_t node_budget = kDefaultNodeBudget);

/// OBDD of context i of a CPT whose scorer is a StepNetwork.
Obdd compile_context(const FoCSCpt& cpt, std::size_t i, std::size_t node_budget = kDefaultNodeBudget);
std::vector<Obdd> compile_contexts(const FoCSCpt& cpt, std::size_t node_budget = kDefaultNodeBudget);

struct Marginal {
  double p1 = 0.0;               // Pr(x=1)
  std::vector<double> masses;    // prior mass of each context
};

/// Pr(x=1) = sum_i p1(context i) * WMC(context i) under a factorized prior
/// over the parents.
Marginal marginal(const FoCSCpt& cpt, std::span<const Obdd> contexts, std::span<const double> prior);
Marginal marginal(const FoCSCpt& cpt, std::span<const double> prior);

}  // namespace focs
