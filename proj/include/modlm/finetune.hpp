// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_FINETUNE_HPP
#define MODLM_FINETUNE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modlm/evalsuite.hpp"
#include "modlm/model.hpp"
#include "modlm/pretrain.hpp"
#include "modlm/vocab.hpp"

namespace modlm::finetune {

// ---------------------------------------------------------------------------
// data types and file formats

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // BIO over the CoNLL tag set
  std::string language;
};

// CoNLL entity types and the fixed label order used by the tagger head.
const std::vector<std::string>& bio_label_set();
std::int32_t bio_label_index(const std::string& label);

// Validates |tokens| == |labels| and BIO well-formedness (I-X only after
// B-X or I-X). Used on gold data; predictions are repaired instead.
void validate_tagged(const TaggedSentence& sentence);

// Stray I-X becomes B-X.
std::vector<std::string> repair_bio(const std::vector<std::string>& tags);

std::vector<evalsuite::LabeledSpan> bio_to_spans(
    const std::vector<std::string>& tags);

// Two-column CoNLL (token TAB-or-space tag, blank line between sentences).
// The per-file language is supplied by the caller.
std::vector<TaggedSentence> load_conll(const std::string& path,
                                       const std::string& language);
void save_conll(const std::string& path,
                const std::vector<TaggedSentence>& sentences);

struct StancePair {
  std::string question;
  std::string comment;
  std::string label;      // favor | against
  std::string language;
  std::string partition;  // supervised | cross_topic | cross_lingual | ""
};

std::vector<StancePair> load_stance_jsonl(const std::string& path);
void save_stance_jsonl(const std::string& path,
                       const std::vector<StancePair>& pairs);

// ---------------------------------------------------------------------------
// pair encoding

struct EncodedPair {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> segments;  // 0 = question side, 1 = comment side
};

// "<s> [question] </s></s> [comment] </s>", truncated to max_len by
// dropping comment tokens first (at least one is kept), then question
// tokens.
EncodedPair encode_pair(const std::string& question,
                        const std::string& comment,
                        const tok::Vocabulary& vocab, int max_len = 256);

// ---------------------------------------------------------------------------
// training

struct FinetunePlan {
  double lr = 2e-5;
  int batch_size = 16;
  int epochs = 3;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-6;
  double weight_decay = 0.01;
  double clip_norm = 1.0;

  pretrain::TrainPlan as_train_plan() const;
};

// Word-level tagging with a linear head over the final hidden states;
// supervision sits on the first subword of each word. Adapters are frozen
// (finetune policy); per-sentence batches route the sentence's language
// adapter. Adds head.tagger.{w,b} to the store.
void train_tagger(model::ParamStore& params, const tok::Vocabulary& vocab,
                  const std::vector<TaggedSentence>& data,
                  const FinetunePlan& plan);

// Tags one sentence. Predictions are BIO-repaired.
std::vector<std::string> tag_sentence(const model::ParamStore& params,
                                      const tok::Vocabulary& vocab,
                                      const std::vector<std::string>& tokens,
                                      const std::string& adapter_lang);

// Routing for evaluation: the target language's own adapter when present,
// otherwise the override. Throws RoutingError when neither exists.
std::vector<std::vector<std::string>> zero_shot_tag(
    const model::ParamStore& params, const tok::Vocabulary& vocab,
    const std::vector<std::vector<std::string>>& sentences,
    const std::string& target_lang,
    const std::optional<std::string>& adapter_override);

// Binary classifier on the final hidden state of <s>. Adds
// head.pair.{w,b}. Label map: against = 0, favor = 1.
void train_pair_classifier(model::ParamStore& params,
                           const tok::Vocabulary& vocab,
                           const std::vector<StancePair>& pairs,
                           const FinetunePlan& plan);

std::string classify_pair(const model::ParamStore& params,
                          const tok::Vocabulary& vocab,
                          const std::string& question,
                          const std::string& comment,
                          const std::string& adapter_lang, int max_len = 256);

}  // namespace modlm::finetune

#endif  // MODLM_FINETUNE_HPP
