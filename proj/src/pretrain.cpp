// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace modlm::pretrain {

void TrainPlan::validate() const {
  if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
  if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps)
    throw ConfigError("warmup_steps must lie in [0, total_steps]");
  if (batch_size < 1 || accumulation < 1)
    throw ConfigError("batch_size and accumulation must be >= 1");
  if (mask_prob < 0.0 || mask_prob > 1.0)
    throw ConfigError("mask_prob must lie in [0, 1]");
  const double split = mask_split_mask + mask_split_random + mask_split_keep;
  if (std::abs(split - 1.0) > 1e-9)
    throw ConfigError("mask split probabilities must sum to 1");
}

double lr_at(std::int64_t step, const TrainPlan& plan) {
  if (step < 0 || step > plan.total_steps)
    throw ConfigError("step outside [0, total_steps]");
  if (plan.warmup_steps > 0 && step <= plan.warmup_steps)
    return plan.peak_lr * static_cast<double>(step) /
           static_cast<double>(plan.warmup_steps);
  if (plan.total_steps == plan.warmup_steps) return plan.peak_lr;
  const double frac = static_cast<double>(step - plan.warmup_steps) /
                      static_cast<double>(plan.total_steps - plan.warmup_steps);
  return plan.peak_lr * (1.0 - frac);
}

MaskedSequence mask_tokens(const std::vector<std::int32_t>& sequence,
                           const std::vector<std::uint8_t>& attention_mask,
                           std::int32_t num_specials, std::int64_t vocab_size,
                           std::int32_t mask_id, const TrainPlan& plan,
                           Rng& rng) {
  MaskedSequence out;
  out.inputs = sequence;
  out.labels.assign(sequence.size(), -1);
  const std::int64_t normal_ids = vocab_size - num_specials;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const bool eligible =
        attention_mask[t] != 0 && sequence[t] >= num_specials;
    if (!eligible) continue;
    if (rng.uniform() >= plan.mask_prob) continue;
    out.labels[t] = sequence[t];
    const double r = rng.uniform();
    if (r < plan.mask_split_mask) {
      out.inputs[t] = mask_id;
    } else if (r < plan.mask_split_mask + plan.mask_split_random) {
      out.inputs[t] = static_cast<std::int32_t>(
          num_specials + rng.uniform_int(normal_ids));
    }  // else keep
  }
  return out;
}

std::vector<std::int64_t> TokenizedCorpus::doc_counts() const {
  std::vector<std::int64_t> counts(languages.size(), 0);
  for (std::size_t i = 0; i < per_lang.size(); ++i)
    counts[i] = static_cast<std::int64_t>(per_lang[i].size());
  return counts;
}

TokenizedCorpus tokenize_corpus(const corpus::Corpus& corpus,
                                const std::vector<std::size_t>& doc_indices,
                                const tok::Vocabulary& vocab,
                                corpus::PrefixVariant variant,
                                bool add_prefix) {
  TokenizedCorpus tc;
  tc.languages = corpus.languages;
  tc.streams.resize(doc_indices.size());
  tc.doc_lang.resize(doc_indices.size());
  tc.per_lang.resize(corpus.languages.size());
  const auto n = static_cast<std::int64_t>(doc_indices.size());
#pragma omp parallel for schedule(dynamic, 4) if (n > 4)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& doc = corpus.docs[doc_indices[static_cast<std::size_t>(i)]];
    std::string doc_text;
    try {
      doc_text = corpus::clean_document(doc);
    } catch (const EmptyDocument&) {
      continue;  // leaves an empty stream
    }
    // the metadata prefix is prepended once per document, before packing
    const std::string full =
        add_prefix ? corpus::format_prefix(doc, variant) + doc_text : doc_text;
    tc.streams[static_cast<std::size_t>(i)] = tok::encode(full, vocab);
  }
  for (std::size_t i = 0; i < doc_indices.size(); ++i) {
    const auto& doc = corpus.docs[doc_indices[i]];
    const auto it = std::find(corpus.languages.begin(),
                              corpus.languages.end(), doc.language);
    const auto li =
        static_cast<std::int32_t>(it - corpus.languages.begin());
    tc.doc_lang[i] = li;
    if (!tc.streams[i].empty())
      tc.per_lang[static_cast<std::size_t>(li)].push_back(i);
  }
  return tc;
}

Sequence draw_sequence(const TokenizedCorpus& tc, double alpha, int span_len,
                       std::int32_t pad_id, Rng& rng) {
  const auto weights = corpus::smoothed_weights(tc.doc_counts(), alpha);
  const std::size_t li = rng.categorical(weights);
  const auto& pool = tc.per_lang[li];
  if (pool.empty()) throw DegenerateInput("language pool is empty");
  const std::size_t di = pool[static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(pool.size())))];
  auto spans = corpus::pack_spans(tc.streams[di], span_len, pad_id, rng);
  const std::size_t si =
      spans.size() == 1
          ? 0
          : static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(spans.size())));
  Sequence seq;
  seq.ids = std::move(spans[si].ids);
  seq.mask = std::move(spans[si].mask);
  seq.lang = tc.languages[static_cast<std::size_t>(
      tc.doc_lang[di])];
  return seq;
}

SequenceSampler make_corpus_sampler(const TokenizedCorpus& tc, double alpha,
                                    int span_len, std::int32_t pad_id) {
  return [&tc, alpha, span_len, pad_id](Rng& rng) {
    return draw_sequence(tc, alpha, span_len, pad_id, rng);
  };
}

std::vector<Sequence> make_validation_set(const TokenizedCorpus& tc,
                                          int span_len, std::int32_t pad_id) {
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < tc.streams.size(); ++i) {
    const auto& stream = tc.streams[i];
    if (stream.empty()) continue;
    Sequence seq;
    const auto len =
        std::min<std::int64_t>(static_cast<std::int64_t>(stream.size()),
                               span_len);
    seq.ids.assign(static_cast<std::size_t>(span_len), pad_id);
    seq.mask.assign(static_cast<std::size_t>(span_len), 0);
    std::copy(stream.begin(), stream.begin() + len, seq.ids.begin());
    std::fill(seq.mask.begin(), seq.mask.begin() + len, 1);
    seq.lang = tc.languages[static_cast<std::size_t>(tc.doc_lang[i])];
    out.push_back(std::move(seq));
  }
  return out;
}

std::string curve_to_tsv(const TrainResult& result) {
  std::ostringstream out;
  out << "step\tlr\tloss\tgrad_norm\n";
  char buf[128];
  for (const auto& log : result.curve) {
    std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%.17g\t%.17g\n",
                  static_cast<long long>(log.step), log.lr, log.loss,
                  log.grad_norm);
    out << buf;
  }
  return out.str();
}

double AdamW::step(model::ParamStore& params, const model::GradStore& grads,
                   const std::set<std::string>& trainable, double lr,
                   double grad_scale) {
  ++t_;
  // global norm over trainable gradients, fixed name order
  double sq = 0.0;
  for (const auto& [name, g] : grads.grads) {
    if (!trainable.count(name)) continue;
    for (const double v : g.data) {
      const double s = v * grad_scale;
      sq += s * s;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip_scale =
      (plan_.clip_norm > 0.0 && norm > plan_.clip_norm)
          ? plan_.clip_norm / norm
          : 1.0;
  const double scale = grad_scale * clip_scale;

  const double bc1 = 1.0 - std::pow(plan_.adam_beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(plan_.adam_beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads.grads) {
    if (!trainable.count(name)) continue;
    Tensor& p = params.at(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Tensor(p.shape)).first;
      v_.emplace(name, Tensor(p.shape));
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    const auto n = static_cast<std::int64_t>(p.data.size());
    double* pd = p.ptr();
    double* md = m.ptr();
    double* vd = v.ptr();
    const double* gd = g.ptr();
#pragma omp parallel for if (n > 4096)
    for (std::int64_t i = 0; i < n; ++i) {
      const double gi = gd[i] * scale;
      md[i] = plan_.adam_beta1 * md[i] + (1.0 - plan_.adam_beta1) * gi;
      vd[i] = plan_.adam_beta2 * vd[i] + (1.0 - plan_.adam_beta2) * gi * gi;
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      pd[i] -= lr * (mhat / (std::sqrt(vhat) + plan_.adam_eps) +
                     plan_.weight_decay * pd[i]);
    }
  }
  return norm;
}

TrainResult train(model::ParamStore& params, const tok::Vocabulary& vocab,
                  const SequenceSampler& sampler, const TrainPlan& plan) {
  plan.validate();
  const auto trainable = model::apply_freeze_policy(params, plan.freeze_mode);
  AdamW optimizer(plan);
  TrainResult result;
  Rng data_rng(Rng::mix(plan.seed, 0xDA7A));
  Rng mask_rng(Rng::mix(plan.seed, 0x3A5C));
  const std::int32_t num_specials = vocab.num_specials();
  const std::int32_t mask_id = vocab.mask_id();

  for (std::int64_t step = 1; step <= plan.total_steps; ++step) {
    model::GradStore grads;
    double loss_sum = 0.0;
    std::int64_t label_count = 0;
    const int seqs = plan.batch_size * plan.accumulation;
    for (int s = 0; s < seqs; ++s) {
      const Sequence seq = sampler(data_rng);
      const MaskedSequence masked =
          mask_tokens(seq.ids, seq.mask, num_specials,
                      params.config.vocab_size, mask_id, plan, mask_rng);
      const auto [l, n] = model::mlm_loss(params, masked.inputs, seq.mask,
                                          masked.labels, seq.lang, &grads);
      loss_sum += l;
      label_count += n;
    }
    if (label_count == 0) continue;
    const double loss = loss_sum / static_cast<double>(label_count);
    if (!std::isfinite(loss))
      throw DataError("non-finite loss at step " + std::to_string(step) +
                      " (lr " + std::to_string(lr_at(step, plan)) +
                      ", labels " + std::to_string(label_count) + ")");
    const double lr = lr_at(step, plan);
    const double grad_norm = optimizer.step(
        params, grads, trainable, lr,
        1.0 / static_cast<double>(label_count));
    result.curve.push_back({step, lr, loss, grad_norm});
  }
  return result;
}

double validation_perplexity(const model::ParamStore& params,
                             const tok::Vocabulary& vocab,
                             const std::vector<Sequence>& validation,
                             std::uint64_t mask_seed, const TrainPlan& plan) {
  if (validation.empty()) throw DegenerateInput("empty validation set");
  double loss_sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const auto& seq = validation[i];
    // per-sequence stream: masking depends only on (mask_seed, i)
    Rng rng(Rng::mix(mask_seed, static_cast<std::uint64_t>(i)));
    const MaskedSequence masked =
        mask_tokens(seq.ids, seq.mask, vocab.num_specials(),
                    params.config.vocab_size, vocab.mask_id(), plan, rng);
    const auto [l, n] = model::mlm_loss(params, masked.inputs, seq.mask,
                                        masked.labels, seq.lang, nullptr);
    loss_sum += l;
    count += n;
  }
  if (count == 0) throw DegenerateInput("no labeled positions in validation");
  return std::exp(loss_sum / static_cast<double>(count));
}

std::string format_pm(double mean, double sd) {
  char mbuf[64];
  char sbuf[64];
  std::snprintf(mbuf, sizeof(mbuf), "%.2f", mean);
  std::snprintf(sbuf, sizeof(sbuf), "%.2f", sd);
  std::string s = sbuf;
  if (s.size() > 1 && s[0] == '0') s.erase(0, 1);  // 0.13 -> .13
  return std::string(mbuf) + "\xC2\xB1" + s;       // U+00B1
}

std::string init_experiment_table(const InitExperimentResult& result) {
  std::ostringstream out;
  out << "strategy\tppl_step0\tppl_final\n";
  char buf[160];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\n", row.strategy.c_str(),
                  row.ppl_step0, row.ppl_final);
    out << buf;
  }
  if (result.random_runs > 0) {
    out << "random (aggregate)\t"
        << format_pm(result.random_step0_mean, result.random_step0_sd) << "\t"
        << format_pm(result.random_final_mean, result.random_final_sd) << "\n";
  }
  return out.str();
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);  // sample standard deviation
  return {mean, std::sqrt(var)};
}

}  // namespace

InitExperimentResult init_experiment(
    const model::ParamStore& base, const tok::Vocabulary& vocab,
    const std::string& target_lang,
    const std::vector<InitStrategySpec>& named_strategies, int random_runs,
    std::uint64_t random_seed_base, int steps, const TrainPlan& plan,
    const SequenceSampler& sampler, const std::vector<Sequence>& validation,
    std::uint64_t mask_seed) {
  InitExperimentResult result;
  auto run_one = [&](const std::string& name,
                     const model::AdapterInit& init) {
    model::ParamStore params = base;
    model::adapter_init(params, target_lang, init);
    InitExperimentRow row;
    row.strategy = name;
    row.ppl_step0 =
        validation_perplexity(params, vocab, validation, mask_seed, plan);
    TrainPlan adapter_plan = plan;
    adapter_plan.freeze_mode = model::FreezeMode::AdaptPretrainV1;
    adapter_plan.total_steps = steps;
    adapter_plan.warmup_steps = std::min(plan.warmup_steps, steps);
    train(params, vocab, sampler, adapter_plan);
    row.ppl_final =
        validation_perplexity(params, vocab, validation, mask_seed, plan);
    result.rows.push_back(row);
    return row;
  };

  for (const auto& spec : named_strategies) run_one(spec.name, spec.init);

  std::vector<double> step0s, finals;
  for (int r = 0; r < random_runs; ++r) {
    model::AdapterInit init;
    init.kind = model::AdapterInit::Kind::Random;
    init.seed = Rng::mix(random_seed_base, static_cast<std::uint64_t>(r));
    const auto row =
        run_one("random[" + std::to_string(r) + "]", init);
    step0s.push_back(row.ppl_step0);
    finals.push_back(row.ppl_final);
  }
  result.random_runs = random_runs;
  if (random_runs > 0) {
    std::tie(result.random_step0_mean, result.random_step0_sd) =
        mean_sd(step0s);
    std::tie(result.random_final_mean, result.random_final_sd) =
        mean_sd(finals);
  }
  return result;
}

}  // namespace modlm::pretrain
