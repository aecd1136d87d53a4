// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_CORPUS_HPP
#define MODLM_CORPUS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "modlm/error.hpp"
#include "modlm/rng.hpp"

namespace modlm::corpus {

enum class BlockRole { Headline, Crosshead, Body, Caption, Sidebar, Byline };

BlockRole parse_role(const std::string& name);
const char* role_name(BlockRole role);

struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
  bool valid() const {
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
  }
};

struct Block {
  BlockRole role = BlockRole::Body;
  std::string text;
};

// One news item: identity, medium, date, language tag, layout blocks.
struct Document {
  std::string id;
  std::string medium;
  Date date;
  std::string language;
  std::vector<Block> blocks;
};

struct Corpus {
  std::vector<std::string> languages;  // closed set, config order
  std::vector<Document> docs;
  int cutoff_year = 2022;

  std::vector<std::size_t> doc_indices_for(const std::string& lang) const;
  std::map<std::string, std::int64_t> doc_counts_per_language() const;
  bool has_language(const std::string& lang) const;
};

// Joins the cleaned block texts with " </s> ". Byline blocks are removed,
// markup tags stripped, whitespace collapsed. Throws EmptyDocument when
// nothing remains.
std::string clean_document(const Document& doc);

enum class PrefixVariant { ReusedVocab, NewVocab };

PrefixVariant parse_prefix_variant(const std::string& name);

// Metadata prefix, e.g. "<medium> rtr.ch <year> 2019 <month> July </s> "
// (new vocabulary) or "</s> rtr.ch </s> 2019 </s> July </s> " (reused).
std::string format_prefix(const Document& doc, PrefixVariant variant);

const char* month_name(int month);

// w_i = counts_i^alpha / sum_j counts_j^alpha. Zero counts keep zero
// weight at any alpha. Throws DegenerateDistribution if all counts are 0.
std::vector<double> smoothed_weights(const std::vector<std::int64_t>& counts,
                                     double alpha);

// Draws n document indices: language ~ smoothed weights over per-language
// document counts, then uniform within the language.
std::vector<std::size_t> sample_documents(const Corpus& corpus, double alpha,
                                          std::uint64_t rng_seed,
                                          std::size_t n);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Per language, holds out whole most-recent days until at least
// min_per_lang articles are accumulated. Throws InsufficientData when a
// language does not have more than min_per_lang documents.
HoldoutSplit holdout_split(const Corpus& corpus, int min_per_lang = 200);

struct PackedSpan {
  std::vector<std::int32_t> ids;   // length == span_len
  std::vector<std::uint8_t> mask;  // 1 = real token, 0 = padding
  std::int64_t offset = 0;         // window start in the source stream
  std::int64_t real_len = 0;
};

// Cuts one document's token stream into contiguous windows of span_len.
// Streams shorter than span_len yield a single padded span; longer streams
// yield floor(len/span_len) windows at seeded random offsets.
std::vector<PackedSpan> pack_spans(const std::vector<std::int32_t>& stream,
                                   int span_len, std::int32_t pad_id,
                                   Rng& rng);

struct OverlapReport {
  std::vector<bool> matched;  // per probe
  std::int64_t match_count = 0;
};

// A probe matches iff its whitespace-collapsed form occurs verbatim as a
// substring of some cleaned document.
OverlapReport overlap_audit(const std::vector<std::string>& probes,
                            const Corpus& corpus);

struct StatsRow {
  std::int64_t articles = 0;
  std::int64_t tokens = 0;
};

struct CorpusStats {
  std::string vocab_id;  // identity of the vocabulary the counts are under
  std::map<std::string, StatsRow> by_language;
  std::map<std::string, StatsRow> by_medium;
  std::map<int, StatsRow> by_year;
  StatsRow total;
};

// Article and token counts per language / medium / year; tokens counted by
// the supplied segmenter over cleaned text (no metadata prefix).
CorpusStats corpus_stats(
    const Corpus& corpus,
    const std::function<std::int64_t(const std::string&)>& count_tokens,
    const std::string& vocab_id);

std::string stats_to_tsv(const CorpusStats& stats);

// Line-delimited JSON corpus file. Validates language tags against the
// configured set, the date fields and the cutoff year, and id uniqueness.
Corpus load_jsonl(const std::string& path,
                  const std::vector<std::string>& languages,
                  int cutoff_year = 2022);
void save_jsonl(const std::string& path, const Corpus& corpus);
Document document_from_json_line(const std::string& line);
std::string document_to_json_line(const Document& doc);

}  // namespace modlm::corpus

#endif  // MODLM_CORPUS_HPP
