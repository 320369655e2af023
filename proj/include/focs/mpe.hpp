#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "focs/focs_cpt.hpp"

namespace focs {

enum class VarKind { message, hidden, selector };
enum class Sense { le, ge, eq };

struct PboVariable {
  std::string name;
  VarKind kind;
};

struct Term {
  std::size_t var;
  double coef;
};

struct LinearConstraint {
  std::string name;
  std::vector<Term> terms;
  Sense sense;
  double rhs;
};

/// One observed child X_i with its FoCS CPT, as laid out in the program.
struct EncodedFamily {
  FoCSCpt cpt;
  uint8_t observed;
  std::vector<double> log_theta;  // ln Pr(observed | context c)
  std::size_t first_hidden = 0;   // variable index of h{i}_0
  std::size_t first_selector = 0; // variable index of z{i}_0
};

/// 0/1 program for arg max_u ln Pr(u) + sum_i ln Pr(x_i | u). Message bits
/// come first (u0..), then per family its hidden units and context selectors.
/// `families` keeps the structure the branch-and-bound solver works on; the
/// linear rows are the big-M form used for export and feasibility checks.
struct PboProblem {
  std::vector<PboVariable> variables;
  std::vector<double> objective;
  double objective_constant = 0.0;
  std::vector<LinearConstraint> constraints;
  double epsilon = 1e-6;

  std::size_t num_message_bits = 0;
  std::vector<double> prior;
  std::vector<EncodedFamily> families;
};

struct Observation {
  FoCSCpt cpt;
  uint8_t x;
};

/// Builds the program. Every scorer must be a single-hidden-layer
/// StepNetwork; prior[j] = Pr(u_j = 1) must lie strictly inside (0,1).
PboProblem encode(std::span<const Observation> families, std::span<const double> prior, double epsilon = 1e-6);

/// ln Pr(u) + sum_i ln Pr(x_i | u) evaluated through the CPTs directly.
double log_probability(const PboProblem& p, std::span<const uint8_t> u);

/// Full assignment (u, h, z) implied by the message bits.
std::vector<uint8_t> complete_assignment(const PboProblem& p, std::span<const uint8_t> u);
double objective_value(const PboProblem& p, std::span<const uint8_t> assignment);
/// True iff every linear row holds (within `tolerance`).
bool satisfies_constraints(const PboProblem& p, std::span<const uint8_t> assignment, double tolerance = 1e-9);

struct SolveOptions {
  std::chrono::duration<double> time_budget = std::chrono::hours(24);
  /// Cross-checks every bound against sub-enumeration (small instances only).
  bool check_bounds = false;
};

struct MpeSolution {
  std::vector<uint8_t> u;
  double log_prob = 0.0;
  bool optimal = false;
  uint64_t nodes = 0;
  double seconds = 0.0;
  std::vector<double> incumbent_trace;
};

/// Exact branch-and-bound. Ties are broken toward the lexicographically
/// smallest u. When the budget runs out the incumbent is returned with
/// optimal = false.
MpeSolution solve(const PboProblem& p, const SolveOptions& opts = {});

void write_lp(std::ostream& out, const PboProblem& p);
void export_lp(const PboProblem& p, const std::filesystem::path& path);
/// Reads back the linear part of an exported program (no family structure).
PboProblem read_lp(std::istream& in);

nlohmann::json to_json(const MpeSolution& s);

}  // namespace focs
