// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_PRETRAIN_HPP
#define MODLM_PRETRAIN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "modlm/corpus.hpp"
#include "modlm/model.hpp"
#include "modlm/rng.hpp"
#include "modlm/vocab.hpp"

namespace modlm::pretrain {

struct TrainPlan {
  double peak_lr = 7e-4;
  int warmup_steps = 100;
  int total_steps = 1000;
  int batch_size = 8;
  int accumulation = 1;  // effective batch = batch_size * accumulation
  double mask_prob = 0.15;
  double mask_split_mask = 0.8;
  double mask_split_random = 0.1;
  double mask_split_keep = 0.1;
  model::FreezeMode freeze_mode = model::FreezeMode::AdaptPretrainV2;
  std::uint64_t seed = 1;
  // optimizer defaults, recorded in the run manifest
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-6;
  double weight_decay = 0.01;
  double clip_norm = 1.0;

  void validate() const;
};

// Linear warmup 0 -> peak over warmup_steps, then linear decay to 0 at
// total_steps.
double lr_at(std::int64_t step, const TrainPlan& plan);

struct MaskedSequence {
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> labels;  // original id at selected positions,
                                     // -1 everywhere else
};

// MLM masking: selects mask_prob of the eligible (non-special, non-pad)
// positions; of those, mask_split_mask become <mask>, mask_split_random a
// uniform non-special id, the rest keep their token.
MaskedSequence mask_tokens(const std::vector<std::int32_t>& sequence,
                           const std::vector<std::uint8_t>& attention_mask,
                           std::int32_t num_specials, std::int64_t vocab_size,
                           std::int32_t mask_id, const TrainPlan& plan,
                           Rng& rng);

struct Sequence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::string lang;
};

// Draws one training sequence; consumed by train().
using SequenceSampler = std::function<Sequence(Rng&)>;

// Documents tokenized once; training then samples spans from the cached
// streams.
struct TokenizedCorpus {
  std::vector<std::string> languages;               // config order
  std::vector<std::vector<std::int32_t>> streams;   // per document
  std::vector<std::int32_t> doc_lang;               // index into languages
  std::vector<std::vector<std::size_t>> per_lang;   // doc ids per language
  std::vector<std::int64_t> doc_counts() const;
};

TokenizedCorpus tokenize_corpus(const corpus::Corpus& corpus,
                                const std::vector<std::size_t>& doc_indices,
                                const tok::Vocabulary& vocab,
                                corpus::PrefixVariant variant,
                                bool add_prefix);

// language ~ smoothed doc counts, document uniform in language, then one
// random window of span_len
Sequence draw_sequence(const TokenizedCorpus& tc, double alpha, int span_len,
                       std::int32_t pad_id, Rng& rng);

SequenceSampler make_corpus_sampler(const TokenizedCorpus& tc, double alpha,
                                    int span_len, std::int32_t pad_id);

// deterministic leading window per document
std::vector<Sequence> make_validation_set(const TokenizedCorpus& tc,
                                          int span_len, std::int32_t pad_id);

struct StepLog {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::vector<StepLog> curve;
};

std::string curve_to_tsv(const TrainResult& result);

// Decoupled-weight-decay adaptive-moment optimizer with global-norm
// clipping. Updates only tensors that received gradients and are in the
// trainable set.
class AdamW {
 public:
  explicit AdamW(const TrainPlan& plan) : plan_(plan) {}

  // returns the pre-clip global gradient norm
  double step(model::ParamStore& params, const model::GradStore& grads,
              const std::set<std::string>& trainable, double lr,
              double grad_scale);

 private:
  TrainPlan plan_;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
  std::int64_t t_ = 0;
};

// MLM training loop under the plan's freezing policy. Deterministic for a
// fixed seed; frozen partitions are never touched. Aborts with a
// diagnostic on non-finite loss.
TrainResult train(model::ParamStore& params, const tok::Vocabulary& vocab,
                  const SequenceSampler& sampler, const TrainPlan& plan);

// exp(mean cross-entropy over all labeled positions); the fixed mask_seed
// pairs masked positions across models.
double validation_perplexity(const model::ParamStore& params,
                             const tok::Vocabulary& vocab,
                             const std::vector<Sequence>& validation,
                             std::uint64_t mask_seed, const TrainPlan& plan);

struct InitStrategySpec {
  std::string name;
  model::AdapterInit init;
};

struct InitExperimentRow {
  std::string strategy;
  double ppl_step0 = 0.0;
  double ppl_final = 0.0;
};

struct InitExperimentResult {
  std::vector<InitExperimentRow> rows;  // named strategies then random runs
  double random_step0_mean = 0.0, random_step0_sd = 0.0;
  double random_final_mean = 0.0, random_final_sd = 0.0;
  int random_runs = 0;
};

// "2.95±.13" (mean to 2 decimals, sd without the leading zero)
std::string format_pm(double mean, double sd);
std::string init_experiment_table(const InitExperimentResult& result);

// Adapter-initialization harness: for each strategy, initialize the
// target adapter, report validation perplexity at step 0, train
// adapter-only for `steps`, and report again. Random runs are repeated
// random_runs times with distinct seeds and reported as mean +- sample sd.
InitExperimentResult init_experiment(
    const model::ParamStore& base, const tok::Vocabulary& vocab,
    const std::string& target_lang,
    const std::vector<InitStrategySpec>& named_strategies, int random_runs,
    std::uint64_t random_seed_base, int steps, const TrainPlan& plan,
    const SequenceSampler& sampler, const std::vector<Sequence>& validation,
    std::uint64_t mask_seed);

}  // namespace modlm::pretrain

#endif  // MODLM_PRETRAIN_HPP
