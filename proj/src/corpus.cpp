// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "modlm/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace modlm::corpus {

BlockRole parse_role(const std::string& name) {
  if (name == "headline") return BlockRole::Headline;
  if (name == "crosshead") return BlockRole::Crosshead;
  if (name == "body") return BlockRole::Body;
  if (name == "caption") return BlockRole::Caption;
  if (name == "sidebar") return BlockRole::Sidebar;
  if (name == "byline") return BlockRole::Byline;
  throw DataError("unknown block role: " + name);
}

const char* role_name(BlockRole role) {
  switch (role) {
    case BlockRole::Headline: return "headline";
    case BlockRole::Crosshead: return "crosshead";
    case BlockRole::Body: return "body";
    case BlockRole::Caption: return "caption";
    case BlockRole::Sidebar: return "sidebar";
    case BlockRole::Byline: return "byline";
  }
  return "body";
}

std::vector<std::size_t> Corpus::doc_indices_for(const std::string& lang) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (docs[i].language == lang) out.push_back(i);
  return out;
}

std::map<std::string, std::int64_t> Corpus::doc_counts_per_language() const {
  std::map<std::string, std::int64_t> counts;
  for (const auto& lang : languages) counts[lang] = 0;
  for (const auto& d : docs) counts[d.language] += 1;
  return counts;
}

bool Corpus::has_language(const std::string& lang) const {
  return std::find(languages.begin(), languages.end(), lang) !=
         languages.end();
}

std::string clean_document(const Document& doc) {
  std::string out;
  for (const auto& block : doc.blocks) {
    if (block.role == BlockRole::Byline) continue;
    const std::string cleaned =
        text::collapse_whitespace(text::strip_markup(block.text));
    if (cleaned.empty()) continue;
    if (!out.empty()) out += " </s> ";
    out += cleaned;
  }
  if (out.empty())
    throw EmptyDocument("document " + doc.id + " has no usable blocks");
  return out;
}

PrefixVariant parse_prefix_variant(const std::string& name) {
  if (name == "reused_vocab") return PrefixVariant::ReusedVocab;
  if (name == "new_vocab") return PrefixVariant::NewVocab;
  throw ConfigError("unknown prefix variant: " + name);
}

const char* month_name(int month) {
  static const char* kNames[] = {"January",   "February", "March",    "April",
                                 "May",       "June",     "July",     "August",
                                 "September", "October",  "November", "December"};
  if (month < 1 || month > 12)
    throw DataError("month out of range: " + std::to_string(month));
  return kNames[month - 1];
}

std::string format_prefix(const Document& doc, PrefixVariant variant) {
  if (doc.medium.empty()) throw DataError("document medium is empty");
  if (!doc.date.valid())
    throw DataError("invalid date on document " + doc.id);
  std::ostringstream out;
  const std::string year = std::to_string(doc.date.year);
  const char* month = month_name(doc.date.month);
  switch (variant) {
    case PrefixVariant::NewVocab:
      out << "<medium> " << doc.medium << " <year> " << year << " <month> "
          << month << " </s> ";
      break;
    case PrefixVariant::ReusedVocab:
      out << "</s> " << doc.medium << " </s> " << year << " </s> " << month
          << " </s> ";
      break;
  }
  return out.str();
}

std::vector<double> smoothed_weights(const std::vector<std::int64_t>& counts,
                                     double alpha) {
  std::vector<double> weights(counts.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0)
      throw DataError("negative count in smoothed_weights");
    if (counts[i] > 0) {
      weights[i] = std::pow(static_cast<double>(counts[i]), alpha);
      total += weights[i];
    }
  }
  if (total == 0.0)
    throw DegenerateDistribution("all counts are zero");
  for (auto& w : weights) w /= total;
  return weights;
}

std::vector<std::size_t> sample_documents(const Corpus& corpus, double alpha,
                                          std::uint64_t rng_seed,
                                          std::size_t n) {
  std::vector<std::vector<std::size_t>> per_lang(corpus.languages.size());
  std::vector<std::int64_t> counts(corpus.languages.size(), 0);
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    const auto it = std::find(corpus.languages.begin(), corpus.languages.end(),
                              corpus.docs[i].language);
    const auto li = static_cast<std::size_t>(it - corpus.languages.begin());
    per_lang[li].push_back(i);
    counts[li] += 1;
  }
  const std::vector<double> weights = smoothed_weights(counts, alpha);
  Rng rng(rng_seed);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t li = rng.categorical(weights);
    const auto& pool = per_lang[li];
    out.push_back(pool[static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(pool.size())))]);
  }
  return out;
}

HoldoutSplit holdout_split(const Corpus& corpus, int min_per_lang) {
  HoldoutSplit split;
  std::vector<char> in_validation(corpus.docs.size(), 0);
  for (const auto& lang : corpus.languages) {
    const auto indices = corpus.doc_indices_for(lang);
    if (static_cast<int>(indices.size()) <= min_per_lang)
      throw InsufficientData("language " + lang + " has " +
                             std::to_string(indices.size()) +
                             " documents, need more than " +
                             std::to_string(min_per_lang));
    std::map<Date, std::vector<std::size_t>> by_day;
    for (auto i : indices) by_day[corpus.docs[i].date].push_back(i);
    std::int64_t held = 0;
    for (auto it = by_day.rbegin();
         it != by_day.rend() && held < min_per_lang; ++it) {
      for (auto i : it->second) in_validation[i] = 1;
      held += static_cast<std::int64_t>(it->second.size());
    }
  }
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    if (in_validation[i])
      split.validation.push_back(i);
    else
      split.train.push_back(i);
  }
  return split;
}

std::vector<PackedSpan> pack_spans(const std::vector<std::int32_t>& stream,
                                   int span_len, std::int32_t pad_id,
                                   Rng& rng) {
  if (span_len < 2) throw ConfigError("span_len must be >= 2");
  std::vector<PackedSpan> spans;
  const auto len = static_cast<std::int64_t>(stream.size());
  if (len <= span_len) {
    PackedSpan s;
    s.ids.assign(static_cast<std::size_t>(span_len), pad_id);
    s.mask.assign(static_cast<std::size_t>(span_len), 0);
    std::copy(stream.begin(), stream.end(), s.ids.begin());
    std::fill(s.mask.begin(), s.mask.begin() + len, 1);
    s.offset = 0;
    s.real_len = len;
    spans.push_back(std::move(s));
    return spans;
  }
  const std::int64_t n_windows = len / span_len;
  for (std::int64_t w = 0; w < n_windows; ++w) {
    PackedSpan s;
    s.offset = rng.uniform_int(len - span_len + 1);
    s.ids.assign(stream.begin() + s.offset,
                 stream.begin() + s.offset + span_len);
    s.mask.assign(static_cast<std::size_t>(span_len), 1);
    s.real_len = span_len;
    spans.push_back(std::move(s));
  }
  return spans;
}

OverlapReport overlap_audit(const std::vector<std::string>& probes,
                            const Corpus& corpus) {
  std::vector<std::string> cleaned;
  cleaned.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    try {
      cleaned.push_back(clean_document(doc));
    } catch (const EmptyDocument&) {
      // documents with no usable text cannot match anything
    }
  }
  OverlapReport report;
  report.matched.assign(probes.size(), false);
  const auto n = static_cast<std::int64_t>(probes.size());
#pragma omp parallel for if (n > 4)
  for (std::int64_t p = 0; p < n; ++p) {
    const std::string probe =
        text::collapse_whitespace(probes[static_cast<std::size_t>(p)]);
    if (probe.empty()) continue;
    for (const auto& doc_text : cleaned) {
      if (doc_text.find(probe) != std::string::npos) {
        report.matched[static_cast<std::size_t>(p)] = true;
        break;
      }
    }
  }
  for (bool m : report.matched) report.match_count += m ? 1 : 0;
  return report;
}

CorpusStats corpus_stats(
    const Corpus& corpus,
    const std::function<std::int64_t(const std::string&)>& count_tokens,
    const std::string& vocab_id) {
  CorpusStats stats;
  stats.vocab_id = vocab_id;
  const auto n = static_cast<std::int64_t>(corpus.docs.size());
  std::vector<std::int64_t> tokens(corpus.docs.size(), 0);
  // token counting is per-document parallel; the reduction below merges in
  // document order
#pragma omp parallel for schedule(dynamic, 16) if (n > 8)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      tokens[static_cast<std::size_t>(i)] =
          count_tokens(clean_document(corpus.docs[static_cast<std::size_t>(i)]));
    } catch (const EmptyDocument&) {
      tokens[static_cast<std::size_t>(i)] = 0;
    }
  }
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    const auto& doc = corpus.docs[i];
    auto add = [&](StatsRow& row) {
      row.articles += 1;
      row.tokens += tokens[i];
    };
    add(stats.by_language[doc.language]);
    add(stats.by_medium[doc.medium]);
    add(stats.by_year[doc.date.year]);
    add(stats.total);
  }
  return stats;
}

std::string stats_to_tsv(const CorpusStats& stats) {
  std::ostringstream out;
  out << "#vocab\t" << stats.vocab_id << "\n";
  out << "dimension\tkey\tarticles\ttokens\n";
  for (const auto& [key, row] : stats.by_language)
    out << "language\t" << key << "\t" << row.articles << "\t" << row.tokens
        << "\n";
  for (const auto& [key, row] : stats.by_medium)
    out << "medium\t" << key << "\t" << row.articles << "\t" << row.tokens
        << "\n";
  for (const auto& [key, row] : stats.by_year)
    out << "year\t" << key << "\t" << row.articles << "\t" << row.tokens
        << "\n";
  out << "total\tall\t" << stats.total.articles << "\t" << stats.total.tokens
      << "\n";
  return out.str();
}

Document document_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad JSON record: ") + e.what());
  }
  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    doc.medium = j.at("medium").get<std::string>();
    const auto& d = j.at("date");
    doc.date.year = d.at("y").get<int>();
    doc.date.month = d.at("m").get<int>();
    doc.date.day = d.at("d").get<int>();
    doc.language = j.at("lang").get<std::string>();
    for (const auto& b : j.at("blocks")) {
      Block block;
      block.role = parse_role(b.at("role").get<std::string>());
      block.text = b.at("text").get<std::string>();
      doc.blocks.push_back(std::move(block));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad document record: ") + e.what());
  }
  return doc;
}

std::string document_to_json_line(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["medium"] = doc.medium;
  j["date"] = {{"y", doc.date.year}, {"m", doc.date.month}, {"d", doc.date.day}};
  j["lang"] = doc.language;
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : doc.blocks) {
    blocks.push_back(nlohmann::ordered_json{{"role", role_name(b.role)},
                                            {"text", b.text}});
  }
  j["blocks"] = std::move(blocks);
  return j.dump();
}

Corpus load_jsonl(const std::string& path,
                  const std::vector<std::string>& languages,
                  int cutoff_year) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.languages = languages;
  corpus.cutoff_year = cutoff_year;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Document doc;
    try {
      doc = document_from_json_line(line);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!corpus.has_language(doc.language))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": language not configured: " + doc.language);
    if (!doc.date.valid())
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid date");
    if (doc.date.year > cutoff_year)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": year beyond corpus cutoff " +
                      std::to_string(cutoff_year));
    if (!seen_ids.insert(doc.id).second)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": duplicate document id: " + doc.id);
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) throw EmptyCorpus("no documents in " + path);
  return corpus;
}

void save_jsonl(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const auto& doc : corpus.docs) out << document_to_json_line(doc) << "\n";
}

}  // namespace modlm::corpus
