#pragma once

// Shared test data: the five-record example dataset and its example scorer.

#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <vector>

#include "focs/data.hpp"
#include "focs/mlp.hpp"

namespace fixtures {

// Records d1..d5 over (U1, U2, X).
inline const char* kExampleCsv =
    "U1,U2,X\n"
    "0,0,1\n"
    "1,0,0\n"
    "1,1,0\n"
    "0,1,1\n"
    "1,1,1\n";

inline std::shared_ptr<const focs::Dataset> example_data() {
  std::istringstream in(kExampleCsv);
  return std::make_shared<const focs::Dataset>(focs::read_csv(in));
}

inline focs::FamilyView example_view() { return focs::FamilyView::all_parents(example_data(), "X"); }

// sigma(6 u1 u2 - 4 u1 - 3 u2 + 2) with u1 u2 = relu(u1 + u2 - 1).
inline focs::Mlp example_mlp() {
  focs::Layer hidden{2, 3, {1, 0, 0, 1, 1, 1}, {0, 0, -1}, focs::Activation::relu};
  focs::Layer out{3, 1, {-4, -3, 6}, {2}, focs::Activation::sigmoid};
  return focs::Mlp({hidden, out});
}

// The same function as a step network with a sigmoid output.
inline focs::StepNetwork example_step() {
  focs::Layer hidden{2, 3, {1, 0, 0, 1, 1, 1}, {-0.5, -0.5, -1.5}, focs::Activation::step};
  focs::Layer out{3, 1, {-4, -3, 6}, {2}, focs::Activation::sigmoid};
  return focs::StepNetwork({hidden, out});
}

inline focs::StepNetwork random_step_network(std::size_t arity, std::size_t hidden, std::mt19937_64& rng,
                                             bool sigmoid_out = false) {
  std::normal_distribution<double> g(0.0, 1.0);
  focs::Layer h{arity, hidden, {}, {}, focs::Activation::step};
  for (std::size_t i = 0; i < arity * hidden; ++i) h.weights.push_back(g(rng));
  for (std::size_t i = 0; i < hidden; ++i) h.bias.push_back(g(rng));
  focs::Layer o{hidden, 1, {}, {g(rng)}, sigmoid_out ? focs::Activation::sigmoid : focs::Activation::identity};
  for (std::size_t i = 0; i < hidden; ++i) o.weights.push_back(g(rng));
  return focs::StepNetwork({h, o});
}

inline std::vector<uint8_t> bits_of(uint64_t m, std::size_t n) {
  std::vector<uint8_t> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = (m >> j) & 1;
  return u;
}

// Random dataset over `arity` parents u0.. and child x.
inline focs::FamilyView random_view(std::size_t arity, std::size_t records, std::mt19937_64& rng,
                                    uint64_t max_weight = 3) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < arity; ++i) names.push_back("u" + std::to_string(i));
  names.push_back("x");
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<uint64_t> w(1, max_weight);
  std::vector<uint8_t> cells;
  std::vector<uint64_t> weights;
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t i = 0; i <= arity; ++i) cells.push_back(coin(rng));
    weights.push_back(w(rng));
  }
  auto data = std::make_shared<const focs::Dataset>(names, cells, weights);
  return focs::FamilyView::all_parents(data, "x");
}

}  // namespace fixtures
