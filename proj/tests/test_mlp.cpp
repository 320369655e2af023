#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "focs/error.hpp"
#include "focs/mlp.hpp"
#include "focs/numeric.hpp"

using namespace focs;

namespace {

FamilyView from_csv(const std::string& text, const std::string& child = "x") {
  std::istringstream in(text);
  return FamilyView::all_parents(std::make_shared<const Dataset>(read_csv(in)), child);
}

}  // namespace

TEST_CASE("example scorer values") {
  Mlp f = fixtures::example_mlp();
  std::vector<uint8_t> u00{0, 0}, u10{1, 0}, u01{0, 1}, u11{1, 1};
  CHECK(f.eval(u00) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(f.eval(u00) == sigmoid(2.0));
  CHECK(f.eval(u10) == doctest::Approx(0.1192).epsilon(1e-3));
  CHECK(f.eval(u10) == sigmoid(-2.0));
  CHECK(f.eval(u01) == sigmoid(-1.0));
  CHECK(f.eval(u11) == sigmoid(1.0));
  CHECK(f.logit(u11) == 1.0);
}

TEST_CASE("all-zero parameters give 0.5") {
  std::size_t hidden[] = {4};
  Mlp net = Mlp::random(3, hidden, Activation::sigmoid, 1);
  net.set_parameters(std::vector<double>(net.num_parameters(), 0.0));
  for (uint64_t m = 0; m < 8; ++m) CHECK(net.eval(fixtures::bits_of(m, 3)) == 0.5);
}

TEST_CASE("eval stays strictly inside (0,1)") {
  Layer out{1, 1, {1e6}, {0}, Activation::sigmoid};
  Mlp big({out});
  std::vector<uint8_t> one{1}, zero{0};
  CHECK(big.eval(one) < 1.0);
  out.weights = {-1e6};
  Mlp small({out});
  CHECK(small.eval(one) > 0.0);
  CHECK(small.eval(zero) == 0.5);
}

TEST_CASE("gradient matches central differences on random nets (property)") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  while (checked < 40) {
    auto c = oracles::random_gradient_case(rng);
    if (oracles::min_kink_distance(c.net, c.batch) < 1e-3) continue;
    CHECK(oracles::gradient_check(c.net, c.batch) < 1e-4);
    ++checked;
  }
}

TEST_CASE("gradient of the output bias vanishes at the constant-output optimum") {
  // Output weights zero, bias at the empirical log-odds of 3 ones in 4.
  Layer h{2, 2, {0.3, -0.2, 0.5, 0.1}, {0.1, 0.2}, Activation::sigmoid};
  Layer o{2, 1, {0, 0}, {std::log(3.0)}, Activation::sigmoid};
  Mlp net({h, o});
  std::vector<std::vector<uint8_t>> us{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  std::vector<Sample> batch;
  uint8_t xs[] = {1, 1, 0, 1};
  for (std::size_t i = 0; i < 4; ++i) batch.push_back({us[i], xs[i], 1.0});
  auto g = gradient(net, batch);
  CHECK(std::abs(g.back()) < 1e-12);
}

TEST_CASE("doubling every weight changes the gradient") {
  std::mt19937_64 rng(9);
  auto c = oracles::random_gradient_case(rng);
  auto g1 = gradient(c.net, c.batch);
  auto p = c.net.parameters();
  for (double& v : p) v *= 2;
  Mlp doubled = c.net;
  doubled.set_parameters(p);
  CHECK(gradient(doubled, c.batch) != g1);
}

TEST_CASE("training learns XOR") {
  FamilyView v = from_csv("a,b,x\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n");
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  Mlp net = train(v, cfg);
  for (std::size_t r = 0; r < v.size(); ++r) {
    CHECK((net.eval(v.parent_values(r)) >= 0.5) == bool(v.child_value(r)));
  }
}

TEST_CASE("training on a constant target") {
  FamilyView v = from_csv("a,b,x\n0,0,1\n0,1,1\n1,0,1\n1,1,1\n0,0,1\n");
  TrainConfig cfg;
  cfg.epochs = 300;
  Mlp net = train(v, cfg);
  for (std::size_t r = 0; r < v.size(); ++r) CHECK(net.eval(v.parent_values(r)) >= 0.9);
}

TEST_CASE("training on the example data beats the single-context fit") {
  FamilyView v = fixtures::example_view();
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 5;
  Mlp net = train(v, cfg);
  double ll = 0.0;
  for (std::size_t r = 0; r < v.size(); ++r) {
    double p = net.eval(v.parent_values(r));
    ll += v.child_value(r) ? std::log(p) : std::log(1 - p);
  }
  double baseline = 3 * std::log(4.0 / 7) + 2 * std::log(3.0 / 7);
  CHECK(ll >= baseline);
}

TEST_CASE("training is deterministic and keeps the best snapshot") {
  FamilyView v = gen_cardinality(8, 2, 500, 3);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.hidden_units = 6;
  Mlp a = train(v, cfg), b = train(v, cfg);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.loss_curve.size() == cfg.epochs + 1);
  double best = *std::min_element(a.loss_curve.begin(), a.loss_curve.end());
  CHECK(loss(a, samples_of(v)) == best);
  cfg.optimizer = Optimizer::adam;
  cfg.learning_rate = 0.01;
  Mlp c = train(v, cfg);
  CHECK(c.loss_curve.back() < c.loss_curve.front());
}

TEST_CASE("divergence names the epoch") {
  FamilyView v = fixtures::example_view();
  TrainConfig cfg;
  cfg.learning_rate = 1e306;
  cfg.epochs = 5;
  try {
    train(v, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(std::string(e.what()).find("epoch " + std::to_string(e.epoch())) != std::string::npos);
  }
}

TEST_CASE("step conversion") {
  Layer h{1, 1, {1.0}, {-0.3}, Activation::sigmoid};
  Layer o{1, 1, {2.0}, {-1.0}, Activation::sigmoid};
  Mlp net({h, o});
  StepNetwork s = to_step(net);
  std::vector<uint8_t> zero{0}, one{1};
  CHECK(s.hidden(zero)[0] == 0);  // pre-activation -0.3
  CHECK(s.output(zero) == -1.0);
  CHECK(s.output(one) == 1.0);
  CHECK_FALSE(s.sigmoid_output());

  Layer h0{1, 1, {1.0}, {0.0}, Activation::relu};
  StepNetwork boundary = to_step(Mlp({h0, o}));
  CHECK(boundary.hidden(zero)[0] == 1);  // pre-activation exactly 0

  StepNetwork sig = to_step(net, OutputScale::sigmoid);
  CHECK(sig.output(one) == sigmoid(1.0));
  CHECK(sig.transform(-1.0) == sigmoid(-1.0));
}

TEST_CASE("to_step is idempotent") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    StepNetwork s = fixtures::random_step_network(4, 3, rng, t % 2);
    StepNetwork again = to_step(s);
    for (uint64_t m = 0; m < 16; ++m) {
      auto u = fixtures::bits_of(m, 4);
      CHECK(again.output(u) == s.output(u));
    }
  }
}

TEST_CASE("thresholding sigma(o) at sigma(t) equals thresholding o at t") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    StepNetwork raw = fixtures::random_step_network(5, 4, rng);
    std::vector<Layer> layers = raw.layers();
    layers.back().act = Activation::sigmoid;
    StepNetwork sig(layers);
    double thr = raw.output(fixtures::bits_of(rng() % 32, 5));
    for (uint64_t m = 0; m < 32; ++m) {
      auto u = fixtures::bits_of(m, 5);
      CHECK((raw.output(u) <= thr) == (sig.output(u) <= sigmoid(thr)));
    }
  }
}

TEST_CASE("JSON round trip") {
  std::size_t hidden[] = {5};
  Mlp net = Mlp::random(3, hidden, Activation::relu, 77);
  net.seed = 77;
  net.loss_curve = {0.7, 0.5};
  Scorer back = scorer_from_json(nlohmann::json::parse(to_json(net).dump()));
  REQUIRE(std::holds_alternative<Mlp>(back));
  CHECK(std::get<Mlp>(back).parameters() == net.parameters());
  CHECK(std::get<Mlp>(back).loss_curve == net.loss_curve);

  StepNetwork s = fixtures::example_step();
  Scorer sback = scorer_from_json(to_json(s));
  REQUIRE(std::holds_alternative<StepNetwork>(sback));
  for (uint64_t m = 0; m < 4; ++m) {
    auto u = fixtures::bits_of(m, 2);
    CHECK(std::get<StepNetwork>(sback).output(u) == s.output(u));
  }
  CHECK(activation_from_string(to_string(Activation::relu)) == Activation::relu);
  CHECK_THROWS(activation_from_string("tanh"));
}

TEST_CASE("example step network reproduces the example scorer") {
  Mlp f = fixtures::example_mlp();
  StepNetwork s = fixtures::example_step();
  for (uint64_t m = 0; m < 4; ++m) {
    auto u = fixtures::bits_of(m, 2);
    CHECK(s.output(u) == f.eval(u));
  }
}
