#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "focs/codec.hpp"
#include "focs/error.hpp"

using namespace focs;

namespace {

CodeSpec spec_of(std::size_t n, std::size_t w, double flip, double prior = 0.8) {
  CodeSpec s;
  s.n = n;
  s.window = w;
  s.flip_prob = flip;
  s.prior_p = prior;
  return s;
}

std::size_t count_fields(const std::string& row) { return std::size_t(std::count(row.begin(), row.end(), ',')) + 1; }

}  // namespace

TEST_CASE("parity encoder examples") {
  std::vector<uint8_t> u3{1, 0, 1};
  CHECK(encode(u3, spec_of(3, 2, 0)) == std::vector<uint8_t>{1, 1, 0});
  std::vector<uint8_t> u5{1, 0, 1, 1, 0};
  CHECK(encode(u5, spec_of(5, 3, 0)) == std::vector<uint8_t>{0, 0, 0, 0, 1});
  for (std::size_t w = 1; w <= 6; ++w) CHECK(encode(std::vector<uint8_t>(6, 0), spec_of(6, w, 0)) == std::vector<uint8_t>(6, 0));
  CHECK_THROWS(encode(u3, spec_of(4, 2, 0)));
}

TEST_CASE("encoder is linear over GF(2) (property)") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 16, w = 1 + rng() % n;
    CodeSpec s = spec_of(n, w, 0);
    auto a = fixtures::bits_of(rng(), n), b = fixtures::bits_of(rng(), n);
    std::vector<uint8_t> ab(n);
    for (std::size_t j = 0; j < n; ++j) ab[j] = a[j] ^ b[j];
    auto ea = encode(a, s), eb = encode(b, s), eab = encode(ab, s);
    for (std::size_t j = 0; j < n; ++j) CHECK(eab[j] == (ea[j] ^ eb[j]));
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(spec_of(3, 4, 0.05).validate(), ValidationError);
  CHECK_THROWS_AS(spec_of(3, 0, 0.05).validate(), ValidationError);
  CHECK_THROWS_AS(spec_of(3, 2, 0.5).validate(), ValidationError);
  CHECK_THROWS_AS(spec_of(3, 2, 0.05, 1.0).validate(), ValidationError);
  CHECK_NOTHROW(spec_of(3, 3, 0.0).validate());
}

TEST_CASE("binary symmetric channel") {
  std::vector<uint8_t> x(100000);
  std::mt19937_64 rng(72);
  for (auto& b : x) b = rng() & 1;
  CHECK(channel(x, 0.0, 1) == x);
  auto y = channel(x, 0.05, 9);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < x.size(); ++i) flips += x[i] != y[i];
  double rate = double(flips) / double(x.size());
  CHECK(rate >= 0.045);
  CHECK(rate <= 0.055);
  CHECK(channel(x, 0.05, 9) == y);
  CHECK(channel(x, 0.05, 10) != y);
}

TEST_CASE("make_pairs") {
  CodePairs pairs = make_pairs(spec_of(10, 3, 0.05), 1 << 14, 3);
  CHECK(pairs.size() == 16384);
  uint64_t ones = 0;
  for (std::size_t r = 0; r < pairs.size(); ++r)
    for (auto b : pairs.message(r)) ones += b;
  double p = double(ones) / (16384.0 * 10);
  CHECK(p >= 0.78);
  CHECK(p <= 0.82);
  FamilyView f3 = pairs.family(3);
  CHECK(f3.child_name() == "x3");
  CHECK(f3.arity() == 10);

  CodePairs identity = make_pairs(spec_of(6, 1, 0.0), 500, 4);
  for (std::size_t r = 0; r < identity.size(); ++r) {
    auto u = identity.message(r), x = identity.received(r);
    CHECK(std::equal(u.begin(), u.end(), x.begin()));
  }
  CHECK(make_pairs(spec_of(6, 2, 0.05), 50, 8).data->variables() ==
        make_pairs(spec_of(6, 2, 0.05), 50, 8).data->variables());
}

TEST_CASE("decoder on the noiseless identity code") {
  CodePairs pairs = make_pairs(spec_of(6, 1, 0.0), 2000, 5);
  DecoderConfig cfg = default_decoder_config();
  cfg.train.epochs = 20;
  auto models = train_decoder(pairs, cfg);
  REQUIRE(models.size() == 6);
  for (const auto& m : models) {
    REQUIRE(m.size() == 2);
    CHECK(m.columns()[0].p1 < 0.01);
    CHECK(m.columns()[1].p1 > 0.99);
  }
  for (uint64_t x = 0; x < 64; ++x) {
    auto bits = fixtures::bits_of(x, 6);
    MpeSolution s = decode(bits, models, 0.8);
    CHECK(s.optimal);
    CHECK(s.u == bits);
  }
}

TEST_CASE("decoder on the noisy adjacent-pair code recovers the channel columns") {
  CodePairs pairs = make_pairs(spec_of(6, 2, 0.05), 6000, 6);
  DecoderConfig cfg = default_decoder_config();
  auto models = train_decoder(pairs, cfg);
  for (const auto& m : models) {
    REQUIRE(m.size() == 2);
    CHECK(std::abs(m.columns()[0].p1 - 0.05) <= 0.02);
    CHECK(std::abs(m.columns()[1].p1 - 0.95) <= 0.02);
  }
  // Joint decoding equals brute force over all 2^6 messages.
  std::vector<double> prior(6, 0.8);
  for (uint64_t x = 0; x < 64; ++x) {
    auto bits = fixtures::bits_of(x, 6);
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < 6; ++i) obs.push_back({models[i], bits[i]});
    auto oracle = oracles::enumerate_mpe(obs, prior);
    MpeSolution s = decode(bits, models, 0.8);
    CHECK(s.u == oracle.u);
    CHECK(std::abs(s.log_prob - oracle.value) <= 1e-9);
  }
}

TEST_CASE("study: noiseless identity code decodes perfectly") {
  StudyConfig cfg;
  cfg.spec = spec_of(5, 1, 0.0);
  cfg.count = 1000;
  cfg.folds = 2;
  Metrics m = run_study(cfg);
  CHECK(m.word_accuracy == 1.0);
  CHECK(m.bit_accuracy == 1.0);
  CHECK(m.hamming == 0.0);
  CHECK(m.all_optimal);
  CHECK(m.folds == 2);
}

TEST_CASE("study: determinism, metric identities, CSV shape") {
  StudyConfig cfg;
  cfg.spec = spec_of(6, 3, 0.05);
  cfg.count = 1500;
  cfg.folds = 3;
  cfg.decoder.train.epochs = 10;
  Metrics a = run_study(cfg);
  Metrics b = run_study(cfg);
  CHECK(a.word_accuracy == b.word_accuracy);
  CHECK(a.bit_accuracy == b.bit_accuracy);
  CHECK(a.hamming_std == b.hamming_std);
  CHECK(a.word_accuracy >= 0.0);
  CHECK(a.word_accuracy <= a.bit_accuracy);
  CHECK(a.bit_accuracy <= 1.0);
  // Per fold hamming = n (1 - bit accuracy); so the means agree too.
  CHECK(a.hamming == doctest::Approx(6.0 * (1.0 - a.bit_accuracy)).epsilon(1e-12));
  CHECK(a.hamming_std == doctest::Approx(6.0 * a.bit_std).epsilon(1e-9));
  CHECK(count_fields(metrics_csv_header()) == 12);
  CHECK(count_fields(metrics_csv_row(cfg, a)) == 12);

  cfg.decoder.threads = 3;
  Metrics c = run_study(cfg);
  CHECK(c.word_accuracy == a.word_accuracy);
  CHECK(c.bit_accuracy == a.bit_accuracy);

  cfg.folds = 1;
  CHECK_THROWS_AS(run_study(cfg), ValidationError);
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  for (std::size_t threads : {1, 2, 4}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, threads, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS(parallel_for(10, threads, [](std::size_t i) {
      if (i == 7) throw std::runtime_error("boom");
    }));
  }
}
