// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "modlm/finetune.hpp"

using namespace modlm;
using namespace modlm::finetune;

namespace {

const std::string kMarker = "\xE2\x96\x81";

tok::Vocabulary word_vocab() {
  // single-char pieces + whole-word pieces for a small working vocabulary
  std::vector<tok::Piece> ps;
  ps.push_back({kMarker, -4.0});
  for (char c = 'a'; c <= 'z'; ++c)
    ps.push_back({std::string(1, c), -5.0});
  const std::vector<std::string> words = {"anna", "bern", "geht", "nach",
                                          "corp", "der",  "die",  "das",
                                          "rex",  "lola", "them", "alp"};
  for (std::size_t i = 0; i < words.size(); ++i)
    ps.push_back({kMarker + words[i], -2.0 - 0.01 * static_cast<double>(i)});
  return tok::Vocabulary::make(ps, false);
}

model::ParamStore tagger_model(const tok::Vocabulary& vocab, int langs = 2) {
  model::ModelConfig c;
  c.vocab_size = vocab.size();
  c.hidden = 16;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 32;
  c.adapter_bottleneck = 4;
  c.max_positions = 40;
  c.include_pooler = false;
  for (int i = 0; i < langs; ++i)
    c.languages.push_back("l" + std::to_string(i));
  return model::build_model(c, 77);
}

}  // namespace

TEST_CASE("BIO utilities") {
  SUBCASE("repair converts stray I-X to B-X") {
    CHECK(repair_bio({"O", "I-PER", "I-PER", "O"}) ==
          std::vector<std::string>{"O", "B-PER", "I-PER", "O"});
    CHECK(repair_bio({"I-LOC"}) == std::vector<std::string>{"B-LOC"});
    CHECK(repair_bio({"B-ORG", "I-PER"}) ==
          std::vector<std::string>{"B-ORG", "B-PER"});
  }
  SUBCASE("spans from tags") {
    const auto spans = bio_to_spans({"B-PER", "I-PER", "O", "B-LOC"});
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].start == 0);
    CHECK(spans[0].end == 2);
    CHECK(spans[0].label == "PER");
    CHECK(spans[1].start == 3);
    CHECK(spans[1].end == 4);
    CHECK(spans[1].label == "LOC");
  }
  SUBCASE("gold validation rejects bad transitions and unknown labels") {
    TaggedSentence s;
    s.tokens = {"a", "b"};
    s.labels = {"O", "I-PER"};
    CHECK_THROWS_AS(validate_tagged(s), DataError);
    s.labels = {"O", "B-XYZ"};
    CHECK_THROWS_AS(validate_tagged(s), DataError);
    s.labels = {"B-PER", "I-PER"};
    CHECK_NOTHROW(validate_tagged(s));
  }
}

TEST_CASE("CoNLL round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "modlm_conll_test";
  fs::create_directories(dir);
  const auto path = (dir / "t.conll").string();
  std::vector<TaggedSentence> data(2);
  data[0].tokens = {"Anna", "geht"};
  data[0].labels = {"B-PER", "O"};
  data[0].language = "l0";
  data[1].tokens = {"Bern"};
  data[1].labels = {"B-LOC"};
  data[1].language = "l0";
  save_conll(path, data);
  const auto loaded = load_conll(path, "l0");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].tokens == data[0].tokens);
  CHECK(loaded[0].labels == data[0].labels);
  CHECK(loaded[1].tokens == data[1].tokens);
  fs::remove_all(dir);
}

TEST_CASE("stance jsonl round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "modlm_stance_test";
  fs::create_directories(dir);
  const auto path = (dir / "s.jsonl").string();
  std::vector<StancePair> pairs(2);
  pairs[0] = {"frage eins", "ich bin dafuer", "favor", "l0", "supervised"};
  pairs[1] = {"frage zwei", "contra", "against", "l1", "cross_lingual"};
  save_stance_jsonl(path, pairs);
  const auto loaded = load_stance_jsonl(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].label == "favor");
  CHECK(loaded[1].partition == "cross_lingual");
  fs::remove_all(dir);
}

TEST_CASE("encode_pair template and truncation") {
  const auto vocab = word_vocab();
  SUBCASE("short pair follows the template") {
    const auto enc = encode_pair("der anna", "die bern", vocab, 256);
    REQUIRE(enc.ids.size() >= 6);
    CHECK(enc.ids.front() == vocab.bos_id());
    CHECK(enc.ids.back() == vocab.eos_id());
    // the double separator sits between the segments
    int double_sep = 0;
    for (std::size_t i = 0; i + 1 < enc.ids.size(); ++i)
      if (enc.ids[i] == vocab.eos_id() && enc.ids[i + 1] == vocab.eos_id())
        ++double_sep;
    CHECK(double_sep == 1);
    // segment structure: 0s then 1s
    CHECK(enc.segments.front() == 0);
    CHECK(enc.segments.back() == 1);
  }
  SUBCASE("an overflowing comment truncates to exactly max_len") {
    std::string comment;
    for (int i = 0; i < 300; ++i) comment += "bern ";
    const auto enc = encode_pair("der anna", comment, vocab, 64);
    CHECK(enc.ids.size() == 64);
    CHECK(enc.ids.back() == vocab.eos_id());
  }
  SUBCASE("at least one comment token survives") {
    std::string question;
    for (int i = 0; i < 300; ++i) question += "anna ";
    const auto enc = encode_pair(question, "bern", vocab, 32);
    CHECK(enc.ids.size() == 32);
    // find the double separator, the next token is the comment token
    std::size_t sep = 0;
    for (std::size_t i = 0; i + 1 < enc.ids.size(); ++i)
      if (enc.ids[i] == vocab.eos_id() && enc.ids[i + 1] == vocab.eos_id())
        sep = i;
    CHECK(sep + 2 < enc.ids.size());
    CHECK(enc.ids[sep + 2] != vocab.eos_id());
  }
}

TEST_CASE("tagger memorizes a single sentence and freezes adapters") {
  const auto vocab = word_vocab();
  auto params = tagger_model(vocab);
  const auto adapters_before = params;

  TaggedSentence s;
  s.tokens = {"anna", "geht", "nach", "bern"};
  s.labels = {"B-PER", "O", "O", "B-LOC"};
  s.language = "l0";

  FinetunePlan plan;
  plan.lr = 5e-3;
  plan.batch_size = 4;
  plan.epochs = 60;
  plan.seed = 3;
  train_tagger(params, vocab, {s}, plan);

  const auto tags = tag_sentence(params, vocab, s.tokens, "l0");
  CHECK(tags == s.labels);  // memorization smoke test

  for (const auto& [name, t] : params.tensors) {
    if (name.find(".adapter.") != std::string::npos)
      CHECK(t.bitwise_equal(adapters_before.at(name)));
  }
}

TEST_CASE("label alignment: one supervised position per word") {
  const auto vocab = word_vocab();
  auto params = tagger_model(vocab);
  // "them" is in vocab; "themthem" fans out into several subwords
  const std::vector<std::string> tokens = {"them", "themthem", "alp"};
  const auto tags = tag_sentence(params, vocab, tokens, "l0");
  CHECK(tags.size() == tokens.size());
}

TEST_CASE("zero-shot routing precedence") {
  const auto vocab = word_vocab();
  auto params = tagger_model(vocab, 3);  // l0 l1 l2
  FinetunePlan plan;
  plan.epochs = 2;
  plan.lr = 1e-3;
  TaggedSentence s;
  s.tokens = {"anna"};
  s.labels = {"B-PER"};
  s.language = "l0";
  train_tagger(params, vocab, {s}, plan);

  const std::vector<std::vector<std::string>> sentences = {{"anna", "bern"}};
  SUBCASE("own adapter wins over the override") {
    const auto with_own = zero_shot_tag(params, vocab, sentences, "l1",
                                        std::optional<std::string>("l2"));
    const auto no_override =
        zero_shot_tag(params, vocab, sentences, "l1", std::nullopt);
    CHECK(with_own == no_override);
  }
  SUBCASE("override used when the language has no adapter") {
    const auto via_l2 = zero_shot_tag(params, vocab, sentences, "xx",
                                      std::optional<std::string>("l2"));
    const auto direct = zero_shot_tag(params, vocab, sentences, "l2",
                                      std::nullopt);
    CHECK(via_l2 == direct);
  }
  SUBCASE("neither adapter available raises RoutingError") {
    CHECK_THROWS_AS(
        zero_shot_tag(params, vocab, sentences, "xx", std::nullopt),
        RoutingError);
    CHECK_THROWS_AS(zero_shot_tag(params, vocab, sentences, "xx",
                                  std::optional<std::string>("yy")),
                    RoutingError);
  }
  SUBCASE("predictions are well-formed BIO") {
    const auto tags = zero_shot_tag(params, vocab, sentences, "l2",
                                    std::nullopt);
    for (const auto& sent : tags) {
      TaggedSentence check;
      check.tokens.assign(sent.size(), "x");
      check.labels = sent;
      CHECK_NOTHROW(validate_tagged(check));
    }
  }
}

TEST_CASE("pair classifier learns separable data and freezes adapters") {
  const auto vocab = word_vocab();
  auto params = tagger_model(vocab);
  const auto before = params;

  // separable: label is favor iff the comment contains "rex"
  std::vector<StancePair> train_pairs;
  const std::vector<std::string> stems = {"der", "die", "das", "geht"};
  for (int i = 0; i < 24; ++i) {
    StancePair p;
    p.question = "anna nach bern";
    const std::string filler = stems[static_cast<std::size_t>(i % 4)];
    if (i % 2 == 0) {
      p.comment = filler + " rex " + stems[static_cast<std::size_t>((i / 2) % 4)];
      p.label = "favor";
    } else {
      p.comment = filler + " lola " + stems[static_cast<std::size_t>((i / 2) % 4)];
      p.label = "against";
    }
    p.language = i % 4 < 2 ? "l0" : "l1";
    train_pairs.push_back(std::move(p));
  }
  FinetunePlan plan;
  plan.lr = 5e-3;
  plan.batch_size = 8;
  plan.epochs = 40;
  plan.seed = 5;
  train_pair_classifier(params, vocab, train_pairs, plan);

  int correct = 0;
  for (const auto& p : train_pairs) {
    const auto pred =
        classify_pair(params, vocab, p.question, p.comment, p.language);
    correct += pred == p.label ? 1 : 0;
  }
  CHECK(correct >= 23);  // > 0.95 on the separable set

  for (const auto& [name, t] : params.tensors)
    if (name.find(".adapter.") != std::string::npos)
      CHECK(t.bitwise_equal(before.at(name)));
}

TEST_CASE("label swap symmetry of the pair head") {
  // relabeling favor<->against and retraining gives the mirrored decision
  const auto vocab = word_vocab();
  FinetunePlan plan;
  plan.lr = 5e-3;
  plan.batch_size = 4;
  plan.epochs = 30;
  plan.seed = 9;

  std::vector<StancePair> pairs;
  for (int i = 0; i < 8; ++i) {
    StancePair p;
    p.question = "der das";
    p.comment = i % 2 == 0 ? "rex der" : "lola die";
    p.label = i % 2 == 0 ? "favor" : "against";
    p.language = "l0";
    pairs.push_back(std::move(p));
  }
  auto m1 = tagger_model(vocab);
  train_pair_classifier(m1, vocab, pairs, plan);
  for (auto& p : pairs) p.label = p.label == "favor" ? "against" : "favor";
  auto m2 = tagger_model(vocab);
  train_pair_classifier(m2, vocab, pairs, plan);
  int agree_mirrored = 0;
  for (int i = 0; i < 8; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    const auto a = classify_pair(m1, vocab, p.question, p.comment, "l0");
    const auto b = classify_pair(m2, vocab, p.question, p.comment, "l0");
    agree_mirrored += (a != b) ? 1 : 0;
  }
  CHECK(agree_mirrored >= 7);
}
