// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_VOCAB_HPP
#define MODLM_VOCAB_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "modlm/error.hpp"

namespace modlm::tok {

// U+2581, prefixes pieces that begin a whitespace-delimited word.
inline const char* kWordMarker = "\xE2\x96\x81";

struct Piece {
  std::string surface;
  double log_prob = 0.0;
};

// Unigram subword vocabulary. Special tokens occupy ids [0, num_specials)
// and sit outside the probabilistic model; pieces follow in file order.
class Vocabulary {
 public:
  Vocabulary() = default;

  // with_metadata_tokens adds the <medium>/<year>/<month> extras used by
  // the new-vocabulary variant.
  static Vocabulary make(std::vector<Piece> pieces, bool with_metadata_tokens,
                         std::map<std::string, std::string> header = {});

  std::int32_t size() const {
    return static_cast<std::int32_t>(specials_.size() + pieces_.size());
  }
  std::int32_t num_specials() const {
    return static_cast<std::int32_t>(specials_.size());
  }
  std::int32_t num_pieces() const {
    return static_cast<std::int32_t>(pieces_.size());
  }

  bool is_special(std::int32_t id) const {
    return id >= 0 && id < num_specials();
  }
  const std::string& special_name(std::int32_t id) const {
    return specials_.at(static_cast<std::size_t>(id));
  }
  std::int32_t special_id(const std::string& name) const;
  std::optional<std::int32_t> find_special(const std::string& name) const;

  std::int32_t bos_id() const { return special_id("<s>"); }
  std::int32_t pad_id() const { return special_id("<pad>"); }
  std::int32_t eos_id() const { return special_id("</s>"); }
  std::int32_t unk_id() const { return special_id("<unk>"); }
  std::int32_t mask_id() const { return special_id("<mask>"); }

  const Piece& piece(std::int32_t id) const {
    return pieces_.at(static_cast<std::size_t>(id - num_specials()));
  }
  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<std::string>& specials() const { return specials_; }

  // piece id (global) for an exact surface, or nullopt
  std::optional<std::int32_t> find_piece(const std::string& surface) const;

  // log prob assigned to a single uncovered character
  double unk_log_prob() const { return unk_log_prob_; }

  // longest piece surface, in codepoints (bounds the lattice fan-out)
  int max_piece_cp_len() const { return max_piece_cp_len_; }

  const std::map<std::string, std::string>& header() const { return header_; }
  std::string id_string() const;  // short identity used in stats output

  void save_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);
  std::string to_tsv() const;
  static Vocabulary from_tsv(const std::string& content);

 private:
  void rebuild_index();

  std::vector<std::string> specials_;
  std::vector<Piece> pieces_;
  std::unordered_map<std::string, std::int32_t> index_;  // surface -> id
  std::map<std::string, std::string> header_;
  double unk_log_prob_ = -30.0;
  int max_piece_cp_len_ = 1;
};

struct Segmentation {
  std::vector<std::int32_t> piece_ids;
  double score = 0.0;
};

// Maximum-score segmentation of normalized text under the piece log
// probabilities (Viterbi over the substring lattice, per whitespace-
// delimited word, each word prefixed with the U+2581 marker). Exact score
// ties prefer fewer pieces, then the lexicographically smaller sequence of
// surfaces. Words that match a special token literal map to that special
// id; uncovered characters map to <unk>.
Segmentation segment(const std::string& normalized_text,
                     const Vocabulary& vocab);

// Subword index range [begin, end) per word, parallel to split_words().
struct WordSpan {
  std::int32_t begin = 0;
  std::int32_t end = 0;
};

std::vector<std::int32_t> encode(const std::string& text,
                                 const Vocabulary& vocab,
                                 std::vector<WordSpan>* word_spans = nullptr);
std::string decode(const std::vector<std::int32_t>& ids,
                   const Vocabulary& vocab);

struct VocabOverlap {
  std::set<std::string> shared;
  std::set<std::string> new_only;
};

// Exact surface-set intersection/difference over non-special pieces.
VocabOverlap vocab_overlap(const Vocabulary& new_vocab,
                           const Vocabulary& old_vocab);

}  // namespace modlm::tok

#endif  // MODLM_VOCAB_HPP
