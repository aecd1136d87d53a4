// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "modlm/corpus.hpp"
#include "modlm/rng.hpp"
#include "modlm/text.hpp"
#include "modlm/unigram_trainer.hpp"
#include "modlm/vocab.hpp"
#include "modlm/vocab_analysis.hpp"

using namespace modlm;
using namespace modlm::tok;

namespace {

Vocabulary toy_vocab(const std::vector<Piece>& pieces) {
  return Vocabulary::make(pieces, /*with_metadata_tokens=*/false);
}

// Exhaustive segmentation oracle over one marker-prefixed word: enumerates
// every split into known pieces (single uncovered characters fall back to
// <unk>), scores them, and applies the documented tie-break: max score,
// then fewest pieces, then lexicographically smallest surface sequence.
struct OracleResult {
  double score = -1e300;
  std::vector<std::string> surfaces;
  bool found = false;
};

void oracle_rec(const std::u32string& word, std::size_t pos,
                const Vocabulary& vocab, double score,
                std::vector<std::string>& current, OracleResult& best) {
  if (pos == word.size()) {
    const bool better =
        !best.found || score > best.score ||
        (score == best.score &&
         (current.size() < best.surfaces.size() ||
          (current.size() == best.surfaces.size() &&
           std::lexicographical_compare(current.begin(), current.end(),
                                        best.surfaces.begin(),
                                        best.surfaces.end()))));
    if (better) {
      best.score = score;
      best.surfaces = current;
      best.found = true;
    }
    return;
  }
  bool any = false;
  for (std::size_t len = 1; pos + len <= word.size(); ++len) {
    const std::string surf = text::encode_utf8(word.substr(pos, len));
    const auto id = vocab.find_piece(surf);
    if (!id) continue;
    any = any || len >= 1;
    current.push_back(surf);
    oracle_rec(word, pos + len, vocab, score + vocab.piece(*id).log_prob,
               current, best);
    current.pop_back();
  }
  if (!any) {
    // matches the segmenter: one unk arc per uncovered character when no
    // piece starts here
    bool piece_starts_here = false;
    for (std::size_t len = 1; pos + len <= word.size(); ++len) {
      if (vocab.find_piece(text::encode_utf8(word.substr(pos, len)))) {
        piece_starts_here = true;
        break;
      }
    }
    if (!piece_starts_here) {
      current.push_back("<unk>");
      oracle_rec(word, pos + 1, vocab, score + vocab.unk_log_prob(), current,
                 best);
      current.pop_back();
    }
  }
}

OracleResult oracle_segment_word(const std::string& word,
                                 const Vocabulary& vocab) {
  OracleResult best;
  std::vector<std::string> current;
  oracle_rec(text::decode_utf8(kWordMarker + word), 0, vocab, 0.0, current,
             best);
  return best;
}

std::vector<std::string> surfaces_of(const Segmentation& seg,
                                     const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (auto id : seg.piece_ids)
    out.push_back(vocab.is_special(id) ? "<unk>" : vocab.piece(id).surface);
  return out;
}

}  // namespace

TEST_CASE("segment: single piece wins over split") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m + "ab", -1.0}, {m + "a", -2.0},
                                {"b", -2.0}, {m, -3.0}, {"a", -3.0}});
  const auto seg = segment("ab", vocab);
  REQUIRE(seg.piece_ids.size() == 1);
  CHECK(vocab.piece(seg.piece_ids[0]).surface == m + "ab");
  CHECK(seg.score == doctest::Approx(-1.0));
}

TEST_CASE("segment: text equal to a vocabulary piece") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m + "hello", -1.5}, {m, -3.0},
                                {"h", -4.0}, {"e", -4.0}, {"l", -4.0},
                                {"o", -4.0}});
  const auto seg = segment("hello", vocab);
  REQUIRE(seg.piece_ids.size() == 1);
  CHECK(seg.score == doctest::Approx(-1.5));
}

TEST_CASE("segment: uncovered characters map to <unk>") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m, -1.0}, {"a", -1.0}});
  const auto seg = segment("aXa", vocab);
  int unk_count = 0;
  for (auto id : seg.piece_ids)
    if (id == vocab.unk_id()) ++unk_count;
  CHECK(unk_count == 1);
}

TEST_CASE("segment equals the exhaustive oracle on random strings") {
  // acceptance-scale oracle run lives in the acceptance suite; this keeps
  // a smaller instance in the unit tests
  Rng rng(2024);
  const std::string m = kWordMarker;
  std::vector<Piece> pieces = {{m, -2.5}, {"a", -2.0}, {"b", -2.3},
                               {"c", -2.7}};
  const std::vector<std::string> surfs = {
      "ab", "bc", "abc", "aa", m + "a", m + "ab", m + "abc", "cc", "cb",
      "ba", "aab"};
  double lp = -1.0;
  for (const auto& s : surfs) {
    pieces.push_back({s, lp});
    lp -= 0.25;
  }
  const auto vocab = toy_vocab(pieces);
  for (int trial = 0; trial < 300; ++trial) {
    const int len = 1 + static_cast<int>(rng.uniform_int(12));
    std::string word;
    for (int i = 0; i < len; ++i)
      word.push_back(static_cast<char>('a' + rng.uniform_int(3)));
    const auto seg = segment(word, vocab);
    const auto oracle = oracle_segment_word(word, vocab);
    REQUIRE(oracle.found);
    CAPTURE(word);
    CHECK(seg.score == oracle.score);  // exact tie semantics
    CHECK(surfaces_of(seg, vocab) == oracle.surfaces);
  }
}

TEST_CASE("encode/decode round trip on normalized text") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m, -2.5}, {"a", -2.0}, {"b", -2.3},
                                {m + "ab", -1.0}, {"ba", -1.9}});
  for (const std::string s : {"ab", "ab ba", "a b ab", "aaa bbb ab"}) {
    CHECK(decode(encode(s, vocab), vocab) == s);
  }
  CHECK(encode("", vocab).empty());
}

TEST_CASE("encode maps special literals to special ids, decode restores them") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m, -2.5}, {"a", -2.0}, {"b", -2.3}});
  const auto ids = encode("a </s> b", vocab);
  REQUIRE(std::count(ids.begin(), ids.end(), vocab.eos_id()) == 1);
  CHECK(decode(ids, vocab) == "a </s> b");
}

TEST_CASE("decode rejects out-of-range ids") {
  const auto vocab = toy_vocab({{"a", -1.0}});
  CHECK_THROWS_AS(decode({vocab.size()}, vocab), DecodeError);
}

TEST_CASE("word spans cover every word") {
  const std::string m = kWordMarker;
  const auto vocab = toy_vocab({{m, -2.5}, {"a", -2.0}, {"b", -2.3},
                                {m + "ab", -1.0}});
  std::vector<WordSpan> spans;
  const auto ids = encode("ab a bb", vocab, &spans);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].begin == 0);
  for (std::size_t w = 1; w < spans.size(); ++w)
    CHECK(spans[w].begin == spans[w - 1].end);
  CHECK(spans.back().end == static_cast<std::int32_t>(ids.size()));
}

TEST_CASE("vocabulary TSV round trip is byte exact") {
  const std::string m = kWordMarker;
  auto vocab = Vocabulary::make(
      {{m + "ab", -1.234567890123456789}, {"a", -2.0e-5}, {"b", -37.5}},
      /*with_metadata_tokens=*/true,
      {{"normalizer", text::kNormalizerName}, {"coverage", "0.9995"}});
  const std::string tsv = vocab.to_tsv();
  const auto loaded = Vocabulary::from_tsv(tsv);
  CHECK(loaded.to_tsv() == tsv);
  CHECK(loaded.num_specials() == 8);
  CHECK(loaded.find_special("<medium>").has_value());
  CHECK(loaded.piece(loaded.num_specials()).surface == m + "ab");

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "modlm_vocab_test";
  fs::create_directories(dir);
  vocab.save_tsv((dir / "v.tsv").string());
  const auto from_file = Vocabulary::load_tsv((dir / "v.tsv").string());
  CHECK(from_file.to_tsv() == tsv);
  fs::remove_all(dir);
}

TEST_CASE("vocab_overlap set semantics") {
  const auto a = toy_vocab({{"x", -1.0}, {"y", -1.0}, {"z", -1.0}});
  SUBCASE("identical vocabularies share everything") {
    const auto r = vocab_overlap(a, a);
    CHECK(r.shared.size() == 3);
    CHECK(r.new_only.empty());
  }
  SUBCASE("disjoint vocabularies share nothing") {
    const auto b = toy_vocab({{"p", -1.0}, {"q", -1.0}});
    const auto r = vocab_overlap(b, a);
    CHECK(r.shared.empty());
    CHECK(r.new_only.size() == 2);
  }
  SUBCASE("planted 18 shared of 50") {
    std::vector<Piece> new_pieces, old_pieces;
    for (int i = 0; i < 50; ++i)
      new_pieces.push_back({"n" + std::to_string(i), -1.0});
    for (int i = 0; i < 18; ++i)
      old_pieces.push_back({"n" + std::to_string(i), -2.0});  // shared
    for (int i = 0; i < 40; ++i)
      old_pieces.push_back({"o" + std::to_string(i), -2.0});
    const auto nv = toy_vocab(new_pieces);
    const auto ov = toy_vocab(old_pieces);
    const auto r = vocab_overlap(nv, ov);
    CHECK(r.shared.size() == 18);
    CHECK(r.new_only.size() == 32);
    // partition property
    CHECK(r.shared.size() + r.new_only.size() ==
          static_cast<std::size_t>(nv.num_pieces()));
  }
}

TEST_CASE("train_unigram on a single-character corpus") {
  TrainerOptions options;
  options.target_size = 5 + 5;  // pieces + base specials
  options.metadata_tokens = false;
  options.seed = 1;
  const std::vector<std::string> corpus(50, "aaaa aaaa aa");
  const auto vocab = train_unigram(corpus, options);
  CHECK(vocab.find_piece("a").has_value());
  // segmentation of "aaaa" is optimal under brute force
  const auto seg = segment("aaaa", vocab);
  const auto oracle = oracle_segment_word("aaaa", vocab);
  CHECK(seg.score == oracle.score);
}

TEST_CASE("train_unigram smoothing boosts the smaller language's pieces") {
  // two languages with disjoint alphabets; "big" has 20x the text
  std::vector<std::string> big, small;
  Rng rng(5);
  for (int i = 0; i < 400; ++i) {
    std::string s;
    for (int w = 0; w < 8; ++w) {
      const char* words[] = {"abba", "baab", "abab", "bbaa"};
      s += words[rng.uniform_int(4)];
      s += " ";
    }
    big.push_back(s);
  }
  for (int i = 0; i < 20; ++i) {
    std::string s;
    for (int w = 0; w < 8; ++w) {
      const char* words[] = {"xyyx", "yxxy", "xyxy", "yyxx"};
      s += words[rng.uniform_int(4)];
      s += " ";
    }
    small.push_back(s);
  }

  auto count_small_alphabet_pieces = [](const Vocabulary& v) {
    int n = 0;
    for (const auto& p : v.pieces())
      if (p.surface.find('x') != std::string::npos ||
          p.surface.find('y') != std::string::npos)
        ++n;
    return n;
  };

  TrainerOptions options;
  options.target_size = 24 + 5;
  options.metadata_tokens = false;

  // proportional sample (alpha = 1)
  std::vector<std::string> proportional;
  for (const auto& s : big) proportional.push_back(s);
  for (const auto& s : small) proportional.push_back(s);
  const auto v_prop = train_unigram(proportional, options);

  // smoothed sample (alpha = 0.3): draw sentences by smoothed language
  // weights, same total size
  const auto weights = corpus::smoothed_weights(
      {static_cast<std::int64_t>(big.size()),
       static_cast<std::int64_t>(small.size())},
      0.3);
  Rng sampler(7);
  std::vector<std::string> smoothed;
  for (std::size_t i = 0; i < proportional.size(); ++i) {
    const auto li = sampler.categorical(weights);
    const auto& pool = li == 0 ? big : small;
    smoothed.push_back(pool[static_cast<std::size_t>(
        sampler.uniform_int(static_cast<std::int64_t>(pool.size())))]);
  }
  const auto v_smooth = train_unigram(smoothed, options);

  CHECK(count_small_alphabet_pieces(v_smooth) >
        count_small_alphabet_pieces(v_prop));
}

TEST_CASE("train_unigram prune rounds drop the minimum exact loss") {
  TrainerOptions options;
  options.target_size = 8 + 5;
  options.metadata_tokens = false;
  options.prune_fraction = 1e-9;  // one piece per round
  options.em_iters_per_round = 2;
  std::vector<std::string> corpus;
  for (int i = 0; i < 30; ++i)
    corpus.push_back("banana bandana ananas anna ban nana");
  TrainerTrace trace;
  const auto vocab = train_unigram(corpus, options, &trace);
  REQUIRE(!trace.rounds.empty());
  CHECK(vocab.num_pieces() <= 8);
  for (const auto& round : trace.rounds) {
    REQUIRE(round.dropped.size() == 1);
    // the dropped piece has the smallest loss among the candidates
    double min_loss = 1e300;
    std::string argmin;
    for (const auto& [surface, loss] : round.losses) {
      if (loss < min_loss) {
        min_loss = loss;
        argmin = surface;
      }
    }
    CHECK(round.dropped[0] == argmin);
    // and the recomputed likelihood drop equals that loss
    const double drop = round.ll_before - round.ll_after_drop;
    CHECK(drop == doctest::Approx(min_loss).epsilon(1e-6));
    // log-likelihood decreases when paths are removed
    CHECK(round.ll_after_drop <= round.ll_before + 1e-12);
  }
}

TEST_CASE("train_unigram rejects a target below the alphabet size") {
  TrainerOptions options;
  options.target_size = 6;  // 5 specials + 1 piece, alphabet needs more
  options.metadata_tokens = false;
  CHECK_THROWS_AS(train_unigram({"abcdefgh"}, options), ConfigError);
}

TEST_CASE("trained vocabulary covers its training sample") {
  TrainerOptions options;
  options.target_size = 40 + 5;
  options.metadata_tokens = false;
  options.coverage = 1.0;
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i)
    corpus.push_back("der die das ein eine einer und oder");
  const auto vocab = train_unigram(corpus, options);
  for (const auto& line : corpus) {
    const auto ids = encode(line, vocab);
    for (auto id : ids) CHECK(id != vocab.unk_id());
  }
}

TEST_CASE("top_new_subwords ranks and routes majority languages") {
  using namespace modlm::corpus;
  const std::string m = kWordMarker;
  // new vocab: pieces for words of two languages
  const auto new_vocab = toy_vocab({{m + "dede", -1.0}, {m + "rmrm", -1.2},
                                    {m + "shared", -1.5}, {"d", -3.0},
                                    {"e", -3.0}, {"r", -3.0}, {"m", -3.0},
                                    {"s", -3.0}, {"h", -3.0}, {"a", -3.0},
                                    {m, -3.5}});
  const auto old_vocab = toy_vocab({{m + "shared", -1.0}});

  Corpus corpus;
  corpus.languages = {"de", "rm"};
  // de text is much bigger; the piece "rmrm" occurs in rm only
  for (int i = 0; i < 50; ++i) {
    Document d;
    d.id = "de" + std::to_string(i);
    d.medium = "m";
    d.date = {2020, 1, 1 + i % 28};
    d.language = "de";
    d.blocks.push_back({BlockRole::Body, "dede dede shared"});
    corpus.docs.push_back(d);
  }
  for (int i = 0; i < 5; ++i) {
    Document d;
    d.id = "rm" + std::to_string(i);
    d.medium = "m";
    d.date = {2020, 2, 1 + i};
    d.language = "rm";
    d.blocks.push_back({BlockRole::Body, "rmrm shared"});
    corpus.docs.push_back(d);
  }

  SUBCASE("piece occurring in one language only gets that language") {
    const auto entries = top_new_subwords(new_vocab, old_vocab, corpus, 0.3, 10);
    bool found = false;
    for (const auto& e : entries) {
      if (e.piece == m + "rmrm") {
        CHECK(e.majority_language == "rm");
        found = true;
      }
      CHECK(!(e.piece == m + "shared"));  // shared pieces are excluded
    }
    CHECK(found);
  }
  SUBCASE("k larger than the new-only set returns the full list") {
    const auto entries =
        top_new_subwords(new_vocab, old_vocab, corpus, 0.3, 1000);
    CHECK(entries.size() == static_cast<std::size_t>(new_vocab.num_pieces() - 1));
  }
  SUBCASE("small alpha can flip the majority language") {
    // plant a piece that de uses 100 times and rm 10 times, with de having
    // vastly more tokens: smoothing flips the argmax to rm
    Corpus c2;
    c2.languages = {"de", "rm"};
    for (int i = 0; i < 100; ++i) {
      Document d;
      d.id = "x" + std::to_string(i);
      d.medium = "m";
      d.date = {2020, 3, 1 + i % 28};
      d.language = "de";
      // "dede" appears a lot (de tokens large), "rmrm" once per 10 docs
      std::string body = "dede dede dede dede dede dede dede dede dede";
      if (i % 10 == 0) body += " rmrm";
      d.blocks.push_back({BlockRole::Body, body});
      c2.docs.push_back(d);
    }
    for (int i = 0; i < 2; ++i) {
      Document d;
      d.id = "y" + std::to_string(i);
      d.medium = "m";
      d.date = {2020, 4, 1 + i};
      d.language = "rm";
      d.blocks.push_back({BlockRole::Body, "rmrm rmrm rmrm rmrm rmrm"});
      c2.docs.push_back(d);
    }
    // raw counts: de contributes 10 "rmrm", rm contributes 10: relative
    // frequency in rm is far higher, so any alpha < 1 favors rm strongly;
    // verify against explicitly computed smoothed frequencies
    const auto entries_a03 =
        top_new_subwords(new_vocab, old_vocab, c2, 0.3, 20);
    for (const auto& e : entries_a03) {
      if (e.piece == m + "rmrm") CHECK(e.majority_language == "rm");
      if (e.piece == m + "dede") CHECK(e.majority_language == "de");
    }
  }
}
