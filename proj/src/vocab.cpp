// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "modlm/text.hpp"

namespace modlm::tok {

namespace {

const std::vector<std::string> kBaseSpecials = {"<s>", "<pad>", "</s>",
                                                "<unk>", "<mask>"};
const std::vector<std::string> kMetadataSpecials = {"<medium>", "<year>",
                                                    "<month>"};

std::string format_log_prob(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Vocabulary Vocabulary::make(std::vector<Piece> pieces,
                            bool with_metadata_tokens,
                            std::map<std::string, std::string> header) {
  Vocabulary v;
  v.specials_ = kBaseSpecials;
  if (with_metadata_tokens)
    v.specials_.insert(v.specials_.end(), kMetadataSpecials.begin(),
                       kMetadataSpecials.end());
  v.pieces_ = std::move(pieces);
  v.header_ = std::move(header);
  v.rebuild_index();
  return v;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  double min_lp = 0.0;
  max_piece_cp_len_ = 1;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (p.surface.empty()) throw DataError("empty piece surface");
    if (p.surface.find('\t') != std::string::npos ||
        p.surface.find('\n') != std::string::npos ||
        p.surface.find(' ') != std::string::npos)
      throw DataError("piece surface contains whitespace: " + p.surface);
    if (!(p.log_prob <= 0.0) || !std::isfinite(p.log_prob))
      throw DataError("piece log_prob must be finite and <= 0: " + p.surface);
    const auto id = static_cast<std::int32_t>(specials_.size() + i);
    if (!index_.emplace(p.surface, id).second)
      throw DataError("duplicate piece surface: " + p.surface);
    min_lp = std::min(min_lp, p.log_prob);
    max_piece_cp_len_ = std::max(
        max_piece_cp_len_,
        static_cast<int>(text::decode_utf8(p.surface).size()));
  }
  unk_log_prob_ = min_lp - 10.0;
}

std::int32_t Vocabulary::special_id(const std::string& name) const {
  const auto it = std::find(specials_.begin(), specials_.end(), name);
  if (it == specials_.end())
    throw ConfigError("special token not in vocabulary: " + name);
  return static_cast<std::int32_t>(it - specials_.begin());
}

std::optional<std::int32_t> Vocabulary::find_special(
    const std::string& name) const {
  const auto it = std::find(specials_.begin(), specials_.end(), name);
  if (it == specials_.end()) return std::nullopt;
  return static_cast<std::int32_t>(it - specials_.begin());
}

std::optional<std::int32_t> Vocabulary::find_piece(
    const std::string& surface) const {
  const auto it = index_.find(surface);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::id_string() const {
  std::ostringstream out;
  out << "unigram-" << size();
  const auto it = header_.find("seed");
  if (it != header_.end()) out << "-s" << it->second;
  return out.str();
}

std::string Vocabulary::to_tsv() const {
  std::ostringstream out;
  for (const auto& [k, v] : header_) out << "#" << k << "\t" << v << "\n";
  for (const auto& p : pieces_)
    out << p.surface << "\t" << format_log_prob(p.log_prob) << "\n";
  for (std::size_t i = 0; i < specials_.size(); ++i)
    out << "#special\t" << specials_[i] << "\t" << i << "\n";
  return out.str();
}

void Vocabulary::save_tsv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write vocabulary file: " + path);
  f << to_tsv();
}

Vocabulary Vocabulary::from_tsv(const std::string& content) {
  Vocabulary v;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto tab1 = line.find('\t');
      if (tab1 == std::string::npos)
        throw DataError("vocab line " + std::to_string(line_no) +
                        ": malformed header");
      const std::string key = line.substr(1, tab1 - 1);
      if (key == "special") {
        const auto tab2 = line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
          throw DataError("vocab line " + std::to_string(line_no) +
                          ": malformed special");
        const std::string name = line.substr(tab1 + 1, tab2 - tab1 - 1);
        const int id = std::stoi(line.substr(tab2 + 1));
        if (id != static_cast<int>(v.specials_.size()))
          throw DataError("special ids must be dense from 0: " + name);
        v.specials_.push_back(name);
      } else {
        v.header_[key] = line.substr(tab1 + 1);
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("vocab line " + std::to_string(line_no) +
                      ": expected piece<TAB>log_prob");
    Piece p;
    p.surface = line.substr(0, tab);
    p.log_prob = std::stod(line.substr(tab + 1));
    v.pieces_.push_back(std::move(p));
  }
  if (v.specials_.empty())
    throw DataError("vocabulary file has no #special section");
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open vocabulary file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_tsv(buf.str());
}

namespace {

// One word's Viterbi state: best segmentation ending at each codepoint
// boundary under (score desc, piece count asc, lexicographic surfaces asc).
struct DpCell {
  double score = -1e300;
  std::int32_t count = 0;
  std::int32_t prev = -1;      // start position of the final piece
  std::int32_t piece_id = -1;  // final piece (or unk)
  bool reached = false;
};

std::vector<std::int32_t> reconstruct(const std::vector<DpCell>& dp, int end) {
  std::vector<std::int32_t> ids;
  int pos = end;
  while (pos > 0) {
    ids.push_back(dp[static_cast<std::size_t>(pos)].piece_id);
    pos = dp[static_cast<std::size_t>(pos)].prev;
  }
  std::reverse(ids.begin(), ids.end());
  return ids;
}

// lexicographic comparison of the surface sequences of two candidate
// segmentations of the same prefix; only called on exact score+count ties
bool lex_less(const std::vector<std::int32_t>& a,
              const std::vector<std::int32_t>& b, const Vocabulary& vocab) {
  auto surface = [&](std::int32_t id) -> const std::string& {
    static const std::string kUnk = "<unk>";
    return vocab.is_special(id) ? kUnk : vocab.piece(id).surface;
  };
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sa = surface(a[i]);
    const auto& sb = surface(b[i]);
    if (sa != sb) return sa < sb;
  }
  return a.size() < b.size();
}

// Viterbi over one marker-prefixed word. Appends piece ids and updates the
// total score.
void segment_word(const std::u32string& word, const Vocabulary& vocab,
                  std::vector<std::int32_t>* out, double* score) {
  const int n = static_cast<int>(word.size());
  std::vector<DpCell> dp(static_cast<std::size_t>(n) + 1);
  dp[0].score = 0.0;
  dp[0].reached = true;
  const int max_len = vocab.max_piece_cp_len();
  for (int pos = 0; pos < n; ++pos) {
    if (!dp[static_cast<std::size_t>(pos)].reached) continue;
    const DpCell& cur = dp[static_cast<std::size_t>(pos)];
    bool extended = false;
    for (int len = 1; len <= max_len && pos + len <= n; ++len) {
      const std::string surf =
          text::encode_utf8(word.substr(static_cast<std::size_t>(pos),
                                        static_cast<std::size_t>(len)));
      const auto id = vocab.find_piece(surf);
      if (!id) continue;
      extended = true;
      DpCell& nxt = dp[static_cast<std::size_t>(pos + len)];
      const double cand_score = cur.score + vocab.piece(*id).log_prob;
      const std::int32_t cand_count = cur.count + 1;
      bool better = false;
      if (!nxt.reached || cand_score > nxt.score) {
        better = true;
      } else if (cand_score == nxt.score) {
        if (cand_count < nxt.count) {
          better = true;
        } else if (cand_count == nxt.count) {
          // exact tie: compare full surface sequences
          auto cand_seq = reconstruct(dp, pos);
          cand_seq.push_back(*id);
          const auto old_seq = reconstruct(dp, pos + len);
          better = lex_less(cand_seq, old_seq, vocab);
        }
      }
      if (better) {
        nxt.score = cand_score;
        nxt.count = cand_count;
        nxt.prev = pos;
        nxt.piece_id = *id;
        nxt.reached = true;
      }
    }
    if (!extended) {
      // uncovered character: exactly one <unk> arc of length 1
      DpCell& nxt = dp[static_cast<std::size_t>(pos + 1)];
      const double cand_score = cur.score + vocab.unk_log_prob();
      if (!nxt.reached || cand_score > nxt.score ||
          (cand_score == nxt.score && cur.count + 1 < nxt.count)) {
        nxt.score = cand_score;
        nxt.count = cur.count + 1;
        nxt.prev = pos;
        nxt.piece_id = vocab.unk_id();
        nxt.reached = true;
      }
    }
  }
  // every position is reachable: known pieces or the unk fallback
  const auto ids = reconstruct(dp, n);
  out->insert(out->end(), ids.begin(), ids.end());
  *score += dp[static_cast<std::size_t>(n)].score;
}

}  // namespace

Segmentation segment(const std::string& normalized_text,
                     const Vocabulary& vocab) {
  Segmentation seg;
  for (const auto& word : text::split_words(normalized_text)) {
    if (auto sid = vocab.find_special(word)) {
      seg.piece_ids.push_back(*sid);  // outside the probabilistic model
      continue;
    }
    const std::u32string marked = text::decode_utf8(kWordMarker + word);
    segment_word(marked, vocab, &seg.piece_ids, &seg.score);
  }
  return seg;
}

std::vector<std::int32_t> encode(const std::string& text_in,
                                 const Vocabulary& vocab,
                                 std::vector<WordSpan>* word_spans) {
  const std::string normalized = text::normalize(text_in);
  std::vector<std::int32_t> ids;
  if (word_spans) word_spans->clear();
  for (const auto& word : text::split_words(normalized)) {
    const auto begin = static_cast<std::int32_t>(ids.size());
    if (auto sid = vocab.find_special(word)) {
      ids.push_back(*sid);
    } else {
      double score = 0.0;
      const std::u32string marked = text::decode_utf8(kWordMarker + word);
      segment_word(marked, vocab, &ids, &score);
    }
    if (word_spans)
      word_spans->push_back({begin, static_cast<std::int32_t>(ids.size())});
  }
  return ids;
}

std::string decode(const std::vector<std::int32_t>& ids,
                   const Vocabulary& vocab) {
  std::string out;
  for (const auto id : ids) {
    if (id < 0 || id >= vocab.size())
      throw DecodeError("id out of range: " + std::to_string(id));
    std::string surf;
    if (vocab.is_special(id)) {
      // specials render as standalone words
      surf = kWordMarker + vocab.special_name(id);
    } else {
      surf = vocab.piece(id).surface;
    }
    out += surf;
  }
  // restore whitespace from the word markers
  std::string res;
  const std::string marker = kWordMarker;
  std::size_t i = 0;
  while (i < out.size()) {
    if (out.compare(i, marker.size(), marker) == 0) {
      if (!res.empty()) res.push_back(' ');
      i += marker.size();
    } else {
      res.push_back(out[i]);
      ++i;
    }
  }
  return res;
}

VocabOverlap vocab_overlap(const Vocabulary& new_vocab,
                           const Vocabulary& old_vocab) {
  VocabOverlap result;
  for (const auto& p : new_vocab.pieces()) {
    if (old_vocab.find_piece(p.surface))
      result.shared.insert(p.surface);
    else
      result.new_only.insert(p.surface);
  }
  return result;
}

}  // namespace modlm::tok
