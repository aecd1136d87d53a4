// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_VOCAB_ANALYSIS_HPP
#define MODLM_VOCAB_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "modlm/corpus.hpp"
#include "modlm/vocab.hpp"

namespace modlm::tok {

struct NewSubwordEntry {
  std::int64_t rank = 0;  // 1-based frequency rank within the whole vocab
  std::string piece;
  std::string majority_language;
  std::int64_t frequency = 0;
};

// Ranks every piece of new_vocab by corpus frequency under segment(),
// restricts to pieces absent from old_vocab, and reports the top k with
// their majority language: argmax over languages of the smoothed
// per-language frequency, i.e. smoothed_weights over per-language token
// counts times the in-language relative piece frequency. Ties break by
// corpus language order.
std::vector<NewSubwordEntry> top_new_subwords(const Vocabulary& new_vocab,
                                              const Vocabulary& old_vocab,
                                              const corpus::Corpus& corpus,
                                              double alpha, std::int64_t k);

std::string new_subwords_to_tsv(const std::vector<NewSubwordEntry>& entries);

}  // namespace modlm::tok

#endif  // MODLM_VOCAB_ANALYSIS_HPP
