// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_EVALSUITE_HPP
#define MODLM_EVALSUITE_HPP

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "modlm/model.hpp"
#include "modlm/tensor.hpp"
#include "modlm/vocab.hpp"

namespace modlm::evalsuite {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct LabeledSpan {
  std::int32_t start = 0;  // word index, inclusive
  std::int32_t end = 0;    // word index, exclusive
  std::string label;

  auto operator<=>(const LabeledSpan&) const = default;
};

// Strict micro span F1: a predicted span counts iff (start, end, label)
// all match a gold span; pooled over the whole corpus. F1 = 0 when
// P + R = 0.
PRF span_f1_strict(const std::vector<std::vector<LabeledSpan>>& gold,
                   const std::vector<std::vector<LabeledSpan>>& pred);

// Per-subword vectors averaged over all hidden layers (embedding output
// included by default), restricted to non-special positions. word_spans,
// when given, receives the word -> row ranges.
Tensor layer_avg_embed(const model::ParamStore& params,
                       const tok::Vocabulary& vocab,
                       const std::string& sentence, const std::string& lang,
                       bool include_embedding_layer = true,
                       std::vector<tok::WordSpan>* word_spans = nullptr);

// Per-word vectors: mean of the word's subword layer-averaged vectors.
Tensor word_vectors(const model::ParamStore& params,
                    const tok::Vocabulary& vocab, const std::string& sentence,
                    const std::string& lang,
                    bool include_embedding_layer = true);

// Greedy max-cosine matching over token vectors: R = mean over reference
// tokens of the best candidate similarity, P symmetric, F harmonic. No idf
// weighting, no baseline rescaling.
PRF bertscore(const Tensor& candidate_vectors, const Tensor& reference_vectors);

struct RetrievalResult {
  std::vector<std::int64_t> top1;  // candidate index per query
  double accuracy = 0.0;           // fraction where top1 == query index
};

// Scores every (query, candidate) pair with BERTScore F; ties break to the
// lowest candidate index. Gold mapping is the identity.
RetrievalResult retrieve(const std::vector<Tensor>& query_vectors,
                         const std::vector<Tensor>& candidate_vectors);

struct AlignmentSet {
  std::set<std::pair<std::int32_t, std::int32_t>> pairs;
};

// Maximum-weight bipartite matching on the cosine similarity matrix
// ("Match"): each word in at most one pair, pairs with similarity <= 0
// excluded.
AlignmentSet simalign_match(const Tensor& src_vectors,
                            const Tensor& tgt_vectors);

// Maximum-weight assignment for a square weight matrix; returns the column
// chosen for each row. Exposed for the factorial-oracle tests.
std::vector<std::int32_t> max_weight_assignment(
    const std::vector<double>& weights, std::int64_t n);

PRF alignment_f1(const AlignmentSet& pred, const AlignmentSet& gold);

// Pharaoh "i-j" pairs, space separated.
AlignmentSet parse_pharaoh(const std::string& line);
std::string to_pharaoh(const AlignmentSet& alignment);

}  // namespace modlm::evalsuite

#endif  // MODLM_EVALSUITE_HPP
