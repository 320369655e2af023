#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <span>
#include <vector>

#include "focs/data.hpp"
#include "focs/focs_cpt.hpp"
#include "focs/mlp.hpp"
#include "focs/mpe.hpp"

namespace focs {

/// Cyclic parity code: x_i is the XOR of u_i..u_{i+window-1} (indices mod n).
struct CodeSpec {
  std::size_t n = 10;
  std::size_t window = 3;
  double flip_prob = 0.05;
  double prior_p = 0.8;

  void validate() const;
};

std::vector<uint8_t> encode(std::span<const uint8_t> u, const CodeSpec& spec);

/// Binary symmetric channel: each bit flips independently with flip_prob.
std::vector<uint8_t> channel(std::span<const uint8_t> x, double flip_prob, uint64_t seed);

/// Message/received-word pairs stored as one dataset with columns
/// u0..u{n-1}, x0..x{n-1}.
struct CodePairs {
  CodeSpec spec;
  std::shared_ptr<const Dataset> data;

  std::size_t size() const { return data->num_records(); }
  std::span<const uint8_t> message(std::size_t r) const { return data->record(r).first(spec.n); }
  std::span<const uint8_t> received(std::size_t r) const { return data->record(r).subspan(spec.n, spec.n); }
  /// Family X_i | U.
  FamilyView family(std::size_t i) const;
  CodePairs subset(std::span<const std::size_t> rows) const;
};

CodePairs make_pairs(const CodeSpec& spec, std::size_t count, uint64_t seed);

struct DecoderConfig {
  TrainConfig train;
  std::size_t threads = 1;
};

/// Defaults for the decoding study: 8 sigmoid hidden units.
DecoderConfig default_decoder_config();

/// Per bit: train the scorer, convert it to a step network, learn one
/// threshold (two contexts) and estimate the columns.
std::vector<FoCSCpt> train_decoder(const CodePairs& pairs, const DecoderConfig& cfg);

/// arg max_u Pr(u | x) by branch-and-bound over all families jointly.
MpeSolution decode(std::span<const uint8_t> x, std::span<const FoCSCpt> models, double prior_p,
                   const SolveOptions& opts = {});

struct Metrics {
  double word_accuracy = 0, word_std = 0;
  double bit_accuracy = 0, bit_std = 0;
  double hamming = 0, hamming_std = 0;
  double seconds = 0, seconds_std = 0;  // mean decode time per instance
  std::size_t folds = 0;
  bool all_optimal = true;
};

struct StudyConfig {
  CodeSpec spec;
  std::size_t count = 1 << 14;
  std::size_t folds = 5;
  uint64_t seed = 1;
  DecoderConfig decoder = default_decoder_config();
  SolveOptions solve;
};

/// k-fold cross validation: seeded shuffle, contiguous folds, train on the
/// rest, decode every held-out received word.
Metrics run_study(const StudyConfig& cfg);

/// n, window, flip_prob, count, word_acc, word_std, bit_acc, bit_std,
/// hamming, hamming_std, seconds, seconds_std
std::string metrics_csv_header();
std::string metrics_csv_row(const StudyConfig& cfg, const Metrics& m);

/// Runs fn(i) for i in [0, count) on up to `threads` worker threads.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace focs
