#include "focs/codec.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "focs/error.hpp"

namespace focs {

void CodeSpec::validate() const {
  if (n < 1) throw ValidationError("code length n must be >= 1");
  if (window < 1 || window > n) throw ValidationError("parity window must satisfy 1 <= window <= n");
  if (!(flip_prob >= 0.0 && flip_prob < 0.5)) throw ValidationError("flip probability must lie in [0, 0.5)");
  if (!(prior_p > 0.0 && prior_p < 1.0)) throw ValidationError("prior must lie strictly inside (0,1)");
}

std::vector<uint8_t> encode(std::span<const uint8_t> u, const CodeSpec& spec) {
  if (u.size() != spec.n) throw std::invalid_argument("message length does not match the code");
  std::vector<uint8_t> x(spec.n, 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t k = 0; k < spec.window; ++k) x[i] ^= u[(i + k) % spec.n];
  }
  return x;
}

namespace {

template <typename Rng>
void flip_bits(std::vector<uint8_t>& bits, double flip_prob, Rng& rng) {
  if (flip_prob <= 0.0) return;
  std::bernoulli_distribution flip(flip_prob);
  for (auto& b : bits) {
    if (flip(rng)) b ^= 1;
  }
}

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<uint8_t> channel(std::span<const uint8_t> x, double flip_prob, uint64_t seed) {
  std::vector<uint8_t> y(x.begin(), x.end());
  std::mt19937_64 rng(seed);
  flip_bits(y, flip_prob, rng);
  return y;
}

FamilyView CodePairs::family(std::size_t i) const {
  if (i >= spec.n) throw std::out_of_range("family index out of range");
  std::vector<std::size_t> parents(spec.n);
  std::iota(parents.begin(), parents.end(), std::size_t{0});
  return FamilyView(data, spec.n + i, std::move(parents));
}

CodePairs CodePairs::subset(std::span<const std::size_t> rows) const {
  return CodePairs{spec, std::make_shared<const Dataset>(data->subset(rows))};
}

CodePairs make_pairs(const CodeSpec& spec, std::size_t count, uint64_t seed) {
  spec.validate();
  if (count < 1) throw ValidationError("count must be >= 1");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.n; ++i) names.push_back("u" + std::to_string(i));
  for (std::size_t i = 0; i < spec.n; ++i) names.push_back("x" + std::to_string(i));

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(spec.prior_p);
  std::vector<uint8_t> cells;
  cells.reserve(count * 2 * spec.n);
  std::vector<uint8_t> u(spec.n);
  for (std::size_t r = 0; r < count; ++r) {
    for (auto& b : u) b = bit(rng) ? 1 : 0;
    auto x = encode(u, spec);
    flip_bits(x, spec.flip_prob, rng);
    cells.insert(cells.end(), u.begin(), u.end());
    cells.insert(cells.end(), x.begin(), x.end());
  }
  return CodePairs{spec, std::make_shared<const Dataset>(std::move(names), std::move(cells),
                                                          std::vector<uint64_t>(count, 1))};
}

DecoderConfig default_decoder_config() {
  DecoderConfig cfg;
  cfg.train.hidden_units = 8;
  cfg.train.hidden_activation = Activation::sigmoid;
  cfg.train.epochs = 60;
  cfg.train.learning_rate = 0.01;
  cfg.train.batch_size = 32;
  cfg.train.optimizer = Optimizer::adam;
  return cfg;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<FoCSCpt> train_decoder(const CodePairs& pairs, const DecoderConfig& cfg) {
  const std::size_t n = pairs.spec.n;
  std::vector<std::optional<FoCSCpt>> models(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    FamilyView view = pairs.family(i);
    TrainConfig tc = cfg.train;
    tc.seed = mix(cfg.train.seed, i);
    Mlp mlp = train(view, tc);
    StepNetwork step = to_step(mlp);
    LearnOptions opts;
    opts.max_contexts = 2;
    opts.min_gain = -kInf;
    models[i] = learn_focs(view, step, opts);
  });
  std::vector<FoCSCpt> out;
  for (auto& m : models) out.push_back(std::move(*m));
  return out;
}

MpeSolution decode(std::span<const uint8_t> x, std::span<const FoCSCpt> models, double prior_p,
                   const SolveOptions& opts) {
  if (x.size() != models.size()) throw ValidationError("need one decoder model per received bit");
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < models.size(); ++i) obs.push_back({models[i], x[i]});
  const std::size_t n = models.empty() ? x.size() : arity(models.front().scorer());
  std::vector<double> prior(n, prior_p);
  PboProblem problem = encode(obs, prior);
  return solve(problem, opts);
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
}

}  // namespace

Metrics run_study(const StudyConfig& cfg) {
  cfg.spec.validate();
  if (cfg.folds < 2) throw ValidationError("cross validation needs at least 2 folds");
  if (cfg.count < cfg.folds) throw ValidationError("count must be at least the number of folds");
  const std::size_t n = cfg.spec.n;
  CodePairs pairs = make_pairs(cfg.spec, cfg.count, cfg.seed);

  std::vector<std::size_t> perm(cfg.count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(mix(cfg.seed, 0xf01d));
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<double> word(cfg.folds), bit(cfg.folds), ham(cfg.folds), secs(cfg.folds);
  Metrics m;
  m.folds = cfg.folds;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const std::size_t begin = f * cfg.count / cfg.folds, end = (f + 1) * cfg.count / cfg.folds;
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t k = 0; k < cfg.count; ++k) (k >= begin && k < end ? test_rows : train_rows).push_back(perm[k]);

    DecoderConfig dc = cfg.decoder;
    dc.train.seed = mix(cfg.seed, 1000 + f);
    auto models = train_decoder(pairs.subset(train_rows), dc);

    std::vector<uint64_t> wrong_bits(test_rows.size());
    std::vector<double> elapsed(test_rows.size());
    std::vector<uint8_t> optimal(test_rows.size(), 1);
    parallel_for(test_rows.size(), dc.threads, [&](std::size_t k) {
      std::size_t r = test_rows[k];
      auto sol = decode(pairs.received(r), models, cfg.spec.prior_p, cfg.solve);
      auto truth = pairs.message(r);
      uint64_t errs = 0;
      for (std::size_t j = 0; j < n; ++j) errs += sol.u[j] != truth[j];
      wrong_bits[k] = errs;
      elapsed[k] = sol.seconds;
      optimal[k] = sol.optimal;
    });

    uint64_t words_ok = 0, bits_wrong = 0;
    double time_total = 0.0;
    for (std::size_t k = 0; k < test_rows.size(); ++k) {
      words_ok += wrong_bits[k] == 0;
      bits_wrong += wrong_bits[k];
      time_total += elapsed[k];
      m.all_optimal = m.all_optimal && optimal[k];
    }
    const double t = double(test_rows.size());
    word[f] = double(words_ok) / t;
    bit[f] = 1.0 - double(bits_wrong) / (t * double(n));
    ham[f] = double(bits_wrong) / t;
    secs[f] = time_total / t;
  }
  mean_std(word, m.word_accuracy, m.word_std);
  mean_std(bit, m.bit_accuracy, m.bit_std);
  mean_std(ham, m.hamming, m.hamming_std);
  mean_std(secs, m.seconds, m.seconds_std);
  return m;
}

std::string metrics_csv_header() {
  return "n,window,flip_prob,count,word_acc,word_std,bit_acc,bit_std,hamming,hamming_std,seconds,seconds_std";
}

std::string metrics_csv_row(const StudyConfig& cfg, const Metrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%g,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6g,%.6g", cfg.spec.n,
                cfg.spec.window, cfg.spec.flip_prob, cfg.count, m.word_accuracy, m.word_std, m.bit_accuracy,
                m.bit_std, m.hamming, m.hamming_std, m.seconds, m.seconds_std);
  return buf;
}

}  // namespace focs
