// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_UNIGRAM_TRAINER_HPP
#define MODLM_UNIGRAM_TRAINER_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "modlm/vocab.hpp"

namespace modlm::tok {

struct TrainerOptions {
  // total vocabulary size including special tokens; the trainer keeps
  // target_size - num_specials pieces
  int target_size = 50000;
  double seed_multiplier = 20.0;
  double coverage = 0.9995;
  double prune_fraction = 0.25;
  int em_iters_per_round = 2;
  std::uint64_t seed = 1;
  int max_piece_len = 16;  // codepoints, including the word marker
  bool metadata_tokens = true;
  // pieces whose expected count falls below this fraction of the corpus
  // total are dropped during the M-step (single characters are kept)
  double min_expected_fraction = 1e-10;
  // recorded in the vocabulary header; the language sampling itself is the
  // caller's job
  double alpha = 0.3;
};

struct PruneRound {
  double ll_before = 0.0;      // corpus log-likelihood entering the round
  double ll_after_drop = 0.0;  // recomputed after removal, before renorm
  std::vector<std::pair<std::string, double>> losses;  // prunable pieces
  std::vector<std::string> dropped;
};

// Optional diagnostics, filled only when passed to train_unigram. The
// exact likelihoods make the pruning rule testable on small corpora.
struct TrainerTrace {
  std::vector<PruneRound> rounds;
};

// Trains a cased unigram-LM vocabulary:
//   1. seed candidates = covered single characters + the most frequent
//      substrings up to max_piece_len, seed_multiplier * target in total;
//   2. alternate EM (exact lattice marginals / renormalization) with prune
//      rounds that drop the prune_fraction of prunable pieces with the
//      smallest exact likelihood loss (single characters are never
//      dropped) until the target is reached.
// Sentences are normalized internally; words matching special-token
// literals are excluded from the statistics.
Vocabulary train_unigram(const std::vector<std::string>& sentences,
                         const TrainerOptions& options,
                         TrainerTrace* trace = nullptr);

}  // namespace modlm::tok

#endif  // MODLM_UNIGRAM_TRAINER_HPP
