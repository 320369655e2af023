#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "focs/data.hpp"

namespace focs {

enum class Activation { identity, relu, sigmoid, step };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Dense layer. Weights are row-major, one row per output unit.
struct Layer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation act = Activation::identity;

  double weight(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }
  /// bias + sum_i w_i x_i, accumulated in input order starting from the bias.
  double preactivation(std::size_t out, std::span<const double> x) const;
};

/// Feed-forward scorer f_x(u) with a single sigmoid output unit.
class Mlp {
public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Glorot-uniform initialization, zero biases.
  static Mlp random(std::size_t arity, std::span<const std::size_t> hidden, Activation hidden_act, uint64_t seed);

  std::size_t arity() const { return layers_.front().inputs; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t num_parameters() const;

  /// Pr(x=1 | u), strictly inside (0,1).
  double eval(std::span<const uint8_t> u) const;
  /// Output pre-activation (log-odds).
  double logit(std::span<const uint8_t> u) const;

  /// Flattened parameters, layer by layer: weights then biases.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);

  uint64_t seed = 0;
  std::vector<double> loss_curve;

private:
  std::vector<Layer> layers_;
};

/// Hard-threshold variant: hidden units output 1 iff their pre-activation is
/// >= 0. The output is the affine pre-activation o(h), optionally passed
/// through the sigmoid when thresholds were learned in probability space.
class StepNetwork {
public:
  StepNetwork() = default;
  explicit StepNetwork(std::vector<Layer> layers);

  std::size_t arity() const { return layers_.front().inputs; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  bool sigmoid_output() const { return layers_.back().act == Activation::sigmoid; }
  bool single_hidden_layer() const { return layers_.size() == 2; }

  /// Scorer value: o(u), or sigmoid(o(u)) for sigmoid-output networks.
  double output(std::span<const uint8_t> u) const;
  double preactivation(std::span<const uint8_t> u) const;
  /// Applies the output transform (identity or sigmoid) to a pre-activation.
  double transform(double o) const;
  /// Activations of the first hidden layer.
  std::vector<uint8_t> hidden(std::span<const uint8_t> u) const;

private:
  std::vector<Layer> layers_;
};

enum class OutputScale { raw, sigmoid };

/// Replaces hidden activations by steps at 0. Weights are unchanged.
StepNetwork to_step(const Mlp& net, OutputScale scale = OutputScale::raw);
StepNetwork to_step(const StepNetwork& net);

/// One training example for the loss and its gradient.
struct Sample {
  std::span<const uint8_t> u;
  uint8_t x = 0;
  double weight = 1.0;
};

/// Weighted mean cross-entropy of the batch.
double loss(const Mlp& net, std::span<const Sample> batch);
/// Exact gradient of `loss` w.r.t. the flattened parameters.
std::vector<double> gradient(const Mlp& net, std::span<const Sample> batch);

enum class Optimizer { momentum, adam };

struct TrainConfig {
  std::size_t hidden_units = 16;
  Activation hidden_activation = Activation::relu;
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  uint64_t seed = 1;
  Optimizer optimizer = Optimizer::momentum;
  double momentum = 0.9;
};

std::vector<Sample> samples_of(const FamilyView& view);

/// Minibatch training on (u, x) pairs. Returns the parameters with the lowest
/// full training loss seen, evaluated after initialization and every epoch.
Mlp train(const FamilyView& view, const TrainConfig& cfg);

using Scorer = std::variant<Mlp, StepNetwork>;

double score(const Scorer& scorer, std::span<const uint8_t> u);
std::vector<double> scores(const Scorer& scorer, const FamilyView& view);
std::size_t arity(const Scorer& scorer);

nlohmann::json to_json(const Mlp& net);
nlohmann::json to_json(const StepNetwork& net);
nlohmann::json to_json(const Scorer& scorer);
/// Step hidden activations decode as a StepNetwork, anything else as an Mlp.
Scorer scorer_from_json(const nlohmann::json& j);

}  // namespace focs
