// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/vocab_analysis.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace modlm::tok {

std::vector<NewSubwordEntry> top_new_subwords(const Vocabulary& new_vocab,
                                              const Vocabulary& old_vocab,
                                              const corpus::Corpus& corpus,
                                              double alpha, std::int64_t k) {
  const auto n_langs = corpus.languages.size();
  const auto n_ids = static_cast<std::size_t>(new_vocab.size());
  // per-document counting in parallel, merged in document order
  const auto n_docs = static_cast<std::int64_t>(corpus.docs.size());
  std::vector<std::vector<std::pair<std::int32_t, std::int64_t>>> doc_counts(
      corpus.docs.size());
#pragma omp parallel for schedule(dynamic, 8) if (n_docs > 8)
  for (std::int64_t d = 0; d < n_docs; ++d) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
    std::string cleaned;
    try {
      cleaned = corpus::clean_document(doc);
    } catch (const EmptyDocument&) {
      continue;
    }
    std::map<std::int32_t, std::int64_t> local;
    for (const std::int32_t id : encode(cleaned, new_vocab)) local[id] += 1;
    auto& out = doc_counts[static_cast<std::size_t>(d)];
    out.assign(local.begin(), local.end());
  }

  std::vector<std::int64_t> total(n_ids, 0);
  std::vector<std::vector<std::int64_t>> per_lang(
      n_langs, std::vector<std::int64_t>(n_ids, 0));
  std::vector<std::int64_t> lang_tokens(n_langs, 0);
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto it = std::find(corpus.languages.begin(),
                              corpus.languages.end(),
                              corpus.docs[d].language);
    const auto li = static_cast<std::size_t>(it - corpus.languages.begin());
    for (const auto& [id, c] : doc_counts[d]) {
      total[static_cast<std::size_t>(id)] += c;
      per_lang[li][static_cast<std::size_t>(id)] += c;
      lang_tokens[li] += c;
    }
  }

  // frequency rank over all non-special pieces (1 = most frequent)
  std::vector<std::int32_t> piece_ids;
  for (std::int32_t id = new_vocab.num_specials(); id < new_vocab.size(); ++id)
    piece_ids.push_back(id);
  std::sort(piece_ids.begin(), piece_ids.end(),
            [&](std::int32_t a, std::int32_t b) {
              const auto fa = total[static_cast<std::size_t>(a)];
              const auto fb = total[static_cast<std::size_t>(b)];
              return fa != fb ? fa > fb : a < b;
            });

  const auto weights = corpus::smoothed_weights(lang_tokens, alpha);

  std::vector<NewSubwordEntry> entries;
  for (std::size_t pos = 0; pos < piece_ids.size(); ++pos) {
    if (static_cast<std::int64_t>(entries.size()) >= k) break;
    const std::int32_t id = piece_ids[pos];
    const auto& surface = new_vocab.piece(id).surface;
    if (old_vocab.find_piece(surface)) continue;  // shared with the old vocab
    NewSubwordEntry e;
    e.rank = static_cast<std::int64_t>(pos) + 1;
    e.piece = surface;
    e.frequency = total[static_cast<std::size_t>(id)];
    // smoothed per-language frequency: P(lang) * P(piece | lang)
    double best = -1.0;
    std::size_t best_lang = 0;
    for (std::size_t li = 0; li < n_langs; ++li) {
      if (lang_tokens[li] == 0) continue;
      const double score =
          weights[li] *
          static_cast<double>(per_lang[li][static_cast<std::size_t>(id)]) /
          static_cast<double>(lang_tokens[li]);
      if (score > best) {  // strict >: ties keep the earlier language
        best = score;
        best_lang = li;
      }
    }
    e.majority_language = corpus.languages.empty()
                              ? ""
                              : corpus.languages[best_lang];
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string new_subwords_to_tsv(const std::vector<NewSubwordEntry>& entries) {
  std::ostringstream out;
  out << "rank\tpiece\tmajority_language\tfrequency\n";
  for (const auto& e : entries)
    out << e.rank << "\t" << e.piece << "\t" << e.majority_language << "\t"
        << e.frequency << "\n";
  return out.str();
}

}  // namespace modlm::tok
