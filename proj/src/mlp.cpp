#include "focs/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "focs/error.hpp"
#include "focs/numeric.hpp"

namespace focs {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::step: return "step";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "step") return Activation::step;
  throw ValidationError("unknown activation '" + s + "'");
}

double Layer::preactivation(std::size_t out, std::span<const double> x) const {
  double acc = bias[out];
  const double* row = weights.data() + out * inputs;
  for (std::size_t i = 0; i < inputs; ++i) acc += row[i] * x[i];
  return acc;
}

namespace {

double activate(Activation act, double a) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::relu: return a > 0 ? a : 0.0;
    case Activation::sigmoid: return sigmoid(a);
    case Activation::step: return a >= 0 ? 1.0 : 0.0;
  }
  return a;
}

void check_shapes(const std::vector<Layer>& layers) {
  if (layers.empty()) throw ValidationError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    if (L.weights.size() != L.inputs * L.outputs || L.bias.size() != L.outputs)
      throw ValidationError("layer " + std::to_string(l) + " has inconsistent weight/bias sizes");
    if (l > 0 && layers[l - 1].outputs != L.inputs)
      throw ValidationError("layer " + std::to_string(l) + " input size does not match previous layer");
    for (double w : L.weights) {
      if (!std::isfinite(w)) throw ValidationError("non-finite weight in layer " + std::to_string(l));
    }
    for (double b : L.bias) {
      if (!std::isfinite(b)) throw ValidationError("non-finite bias in layer " + std::to_string(l));
    }
  }
  if (layers.back().outputs != 1) throw ValidationError("network must have exactly one output unit");
}

/// Forward pass through all but the output layer.
std::vector<double> hidden_forward(const std::vector<Layer>& layers, std::span<const uint8_t> u) {
  std::vector<double> x(u.begin(), u.end());
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const Layer& L = layers[l];
    std::vector<double> y(L.outputs);
    for (std::size_t o = 0; o < L.outputs; ++o) y[o] = activate(L.act, L.preactivation(o, x));
    x = std::move(y);
  }
  return x;
}

double output_preactivation(const std::vector<Layer>& layers, std::span<const uint8_t> u) {
  if (u.size() != layers.front().inputs)
    throw std::invalid_argument("input arity " + std::to_string(u.size()) + " does not match network arity " +
                                std::to_string(layers.front().inputs));
  auto h = hidden_forward(layers, u);
  return layers.back().preactivation(0, h);
}

}  // namespace

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  check_shapes(layers_);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    if (layers_[l].act == Activation::step) throw ValidationError("Mlp hidden layers cannot use step activations");
  }
  layers_.back().act = Activation::sigmoid;
}

Mlp Mlp::random(std::size_t arity, std::span<const std::size_t> hidden, Activation hidden_act, uint64_t seed) {
  if (hidden_act == Activation::step) throw ValidationError("cannot train step activations");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  std::size_t in = arity;
  std::vector<std::size_t> sizes(hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    Layer L;
    L.inputs = in;
    L.outputs = sizes[l];
    L.act = l + 1 < sizes.size() ? hidden_act : Activation::sigmoid;
    double limit = std::sqrt(6.0 / double(L.inputs + L.outputs));
    std::uniform_real_distribution<double> dist(-limit, limit);
    L.weights.resize(L.inputs * L.outputs);
    for (double& w : L.weights) w = dist(rng);
    L.bias.assign(L.outputs, 0.0);
    layers.push_back(std::move(L));
    in = sizes[l];
  }
  Mlp net(std::move(layers));
  net.seed = seed;
  return net;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += L.weights.size() + L.bias.size();
  return n;
}

double Mlp::logit(std::span<const uint8_t> u) const { return output_preactivation(layers_, u); }

double Mlp::eval(std::span<const uint8_t> u) const { return sigmoid(logit(u)); }

std::vector<double> Mlp::parameters() const {
  std::vector<double> p;
  p.reserve(num_parameters());
  for (const auto& L : layers_) {
    p.insert(p.end(), L.weights.begin(), L.weights.end());
    p.insert(p.end(), L.bias.begin(), L.bias.end());
  }
  return p;
}

void Mlp::set_parameters(std::span<const double> params) {
  if (params.size() != num_parameters()) throw std::invalid_argument("parameter vector has the wrong size");
  std::size_t k = 0;
  for (auto& L : layers_) {
    for (double& w : L.weights) w = params[k++];
    for (double& b : L.bias) b = params[k++];
  }
}

StepNetwork::StepNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
  check_shapes(layers_);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    if (layers_[l].act != Activation::step) throw ValidationError("StepNetwork hidden layers must use step activations");
  }
  Activation out = layers_.back().act;
  if (out != Activation::identity && out != Activation::sigmoid)
    throw ValidationError("StepNetwork output must be identity or sigmoid");
}

double StepNetwork::preactivation(std::span<const uint8_t> u) const { return output_preactivation(layers_, u); }

double StepNetwork::transform(double o) const { return sigmoid_output() ? sigmoid(o) : o; }

double StepNetwork::output(std::span<const uint8_t> u) const { return transform(preactivation(u)); }

std::vector<uint8_t> StepNetwork::hidden(std::span<const uint8_t> u) const {
  std::vector<double> x(u.begin(), u.end());
  const Layer& L = layers_.front();
  std::vector<uint8_t> h(L.outputs);
  for (std::size_t o = 0; o < L.outputs; ++o) h[o] = L.preactivation(o, x) >= 0 ? 1 : 0;
  return h;
}

StepNetwork to_step(const Mlp& net, OutputScale scale) {
  std::vector<Layer> layers = net.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) layers[l].act = Activation::step;
  layers.back().act = scale == OutputScale::raw ? Activation::identity : Activation::sigmoid;
  return StepNetwork(std::move(layers));
}

StepNetwork to_step(const StepNetwork& net) { return net; }

double loss(const Mlp& net, std::span<const Sample> batch) {
  double total = 0.0, weight = 0.0;
  for (const auto& s : batch) {
    double a = net.logit(s.u);
    // -[x log s(a) + (1-x) log(1 - s(a))] = softplus(a) - x a
    total += s.weight * (softplus(a) - (s.x ? a : 0.0));
    weight += s.weight;
  }
  return weight > 0 ? total / weight : 0.0;
}

std::vector<double> gradient(const Mlp& net, std::span<const Sample> batch) {
  const auto& layers = net.layers();
  const std::size_t L = layers.size();
  // Offsets of each layer's weights/biases in the flat vector.
  std::vector<std::size_t> w_off(L), b_off(L);
  {
    std::size_t k = 0;
    for (std::size_t l = 0; l < L; ++l) {
      w_off[l] = k;
      k += layers[l].weights.size();
      b_off[l] = k;
      k += layers[l].bias.size();
    }
  }
  std::vector<double> grad(net.num_parameters(), 0.0);
  double total_weight = 0.0;
  std::vector<std::vector<double>> acts(L + 1), pre(L);

  for (const auto& s : batch) {
    acts[0].assign(s.u.begin(), s.u.end());
    for (std::size_t l = 0; l < L; ++l) {
      const Layer& layer = layers[l];
      pre[l].resize(layer.outputs);
      acts[l + 1].resize(layer.outputs);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        pre[l][o] = layer.preactivation(o, acts[l]);
        acts[l + 1][o] = l + 1 < L ? activate(layer.act, pre[l][o]) : pre[l][o];
      }
    }
    // d loss / d output pre-activation for sigmoid + cross-entropy.
    std::vector<double> delta{(sigmoid(pre[L - 1][0]) - (s.x ? 1.0 : 0.0)) * s.weight};
    for (std::size_t l = L; l-- > 0;) {
      const Layer& layer = layers[l];
      std::vector<double> prev(layer.inputs, 0.0);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        grad[b_off[l] + o] += delta[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          grad[w_off[l] + o * layer.inputs + i] += delta[o] * acts[l][i];
          prev[i] += delta[o] * layer.weight(o, i);
        }
      }
      if (l == 0) break;
      const Layer& below = layers[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) {
        double a = pre[l - 1][i];
        double d = 0.0;
        switch (below.act) {
          case Activation::identity: d = 1.0; break;
          case Activation::relu: d = a > 0 ? 1.0 : 0.0; break;
          case Activation::sigmoid: {
            double sa = sigmoid(a);
            d = sa * (1.0 - sa);
            break;
          }
          case Activation::step: d = 0.0; break;
        }
        prev[i] *= d;
      }
      delta = std::move(prev);
    }
    total_weight += s.weight;
  }
  if (total_weight > 0) {
    for (double& g : grad) g /= total_weight;
  }
  return grad;
}

std::vector<Sample> samples_of(const FamilyView& view) {
  std::vector<Sample> out;
  out.reserve(view.size());
  for (std::size_t r = 0; r < view.size(); ++r)
    out.push_back(Sample{view.parent_values(r), view.child_value(r), double(view.weight(r))});
  return out;
}

Mlp train(const FamilyView& view, const TrainConfig& cfg) {
  if (view.size() == 0) throw ValidationError("cannot train on an empty dataset");
  if (cfg.hidden_units == 0 || cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0))
    throw ValidationError("train: hidden units, epochs, batch size and learning rate must be positive");

  std::size_t hidden[] = {cfg.hidden_units};
  Mlp net = Mlp::random(view.arity(), hidden, cfg.hidden_activation, cfg.seed);
  auto all = samples_of(view);

  std::vector<double> params = net.parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  std::size_t t = 0;

  Mlp best = net;
  double best_loss = loss(net, all);
  if (!std::isfinite(best_loss)) throw DivergenceError(0);
  std::vector<double> curve{best_loss};

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(all[order[i]]);
      auto g = gradient(net, batch);
      ++t;
      if (cfg.optimizer == Optimizer::adam) {
        double c1 = 1.0 - std::pow(kBeta1, double(t));
        double c2 = 1.0 - std::pow(kBeta2, double(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
          m[k] = kBeta1 * m[k] + (1 - kBeta1) * g[k];
          v[k] = kBeta2 * v[k] + (1 - kBeta2) * g[k] * g[k];
          params[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
        }
      } else {
        for (std::size_t k = 0; k < params.size(); ++k) {
          m[k] = cfg.momentum * m[k] - cfg.learning_rate * g[k];
          params[k] += m[k];
        }
      }
      net.set_parameters(params);
    }
    double l = loss(net, all);
    if (!std::isfinite(l)) throw DivergenceError(epoch);
    curve.push_back(l);
    if (l < best_loss) {
      best_loss = l;
      best = net;
    }
  }
  best.seed = cfg.seed;
  best.loss_curve = std::move(curve);
  return best;
}

double score(const Scorer& scorer, std::span<const uint8_t> u) {
  return std::visit(
      [&](const auto& net) {
        using T = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<T, Mlp>) return net.eval(u);
        else return net.output(u);
      },
      scorer);
}

std::vector<double> scores(const Scorer& scorer, const FamilyView& view) {
  std::vector<double> f(view.size());
  for (std::size_t r = 0; r < view.size(); ++r) f[r] = score(scorer, view.parent_values(r));
  return f;
}

std::size_t arity(const Scorer& scorer) {
  return std::visit([](const auto& net) { return net.arity(); }, scorer);
}

namespace {

nlohmann::json layers_json(const std::vector<Layer>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& L : layers) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t o = 0; o < L.outputs; ++o) {
      w.push_back(std::vector<double>(L.weights.begin() + o * L.inputs, L.weights.begin() + (o + 1) * L.inputs));
    }
    arr.push_back({{"w", w}, {"b", L.bias}, {"act", to_string(L.act)}});
  }
  return arr;
}

std::vector<Layer> layers_from_json(const nlohmann::json& j) {
  if (!j.contains("layers") || !j["layers"].is_array()) throw ValidationError("model JSON lacks a 'layers' array");
  std::vector<Layer> layers;
  for (const auto& jl : j["layers"]) {
    Layer L;
    auto rows = jl.at("w").get<std::vector<std::vector<double>>>();
    L.bias = jl.at("b").get<std::vector<double>>();
    L.act = activation_from_string(jl.at("act").get<std::string>());
    L.outputs = rows.size();
    L.inputs = rows.empty() ? 0 : rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != L.inputs) throw ValidationError("ragged weight matrix in model JSON");
      L.weights.insert(L.weights.end(), r.begin(), r.end());
    }
    layers.push_back(std::move(L));
  }
  return layers;
}

}  // namespace

nlohmann::json to_json(const Mlp& net) {
  return {{"layers", layers_json(net.layers())}, {"seed", net.seed}, {"loss_curve", net.loss_curve}};
}

nlohmann::json to_json(const StepNetwork& net) { return {{"layers", layers_json(net.layers())}}; }

nlohmann::json to_json(const Scorer& scorer) {
  return std::visit([](const auto& net) { return to_json(net); }, scorer);
}

Scorer scorer_from_json(const nlohmann::json& j) {
  try {
    auto layers = layers_from_json(j);
    bool stepped = std::any_of(layers.begin(), layers.end() - (layers.empty() ? 0 : 1),
                               [](const Layer& L) { return L.act == Activation::step; });
    if (stepped) return StepNetwork(std::move(layers));
    Mlp net(std::move(layers));
    net.seed = j.value("seed", uint64_t{0});
    net.loss_curve = j.value("loss_curve", std::vector<double>{});
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace focs
