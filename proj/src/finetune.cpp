// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modlm/kernels.hpp"

namespace modlm::finetune {

// ---------------------------------------------------------------------------
// BIO utilities

const std::vector<std::string>& bio_label_set() {
  static const std::vector<std::string> kLabels = {
      "O",     "B-PER", "I-PER", "B-ORG", "I-ORG",
      "B-LOC", "I-LOC", "B-MISC", "I-MISC"};
  return kLabels;
}

std::int32_t bio_label_index(const std::string& label) {
  const auto& set = bio_label_set();
  const auto it = std::find(set.begin(), set.end(), label);
  if (it == set.end()) throw DataError("label outside schema: " + label);
  return static_cast<std::int32_t>(it - set.begin());
}

void validate_tagged(const TaggedSentence& sentence) {
  if (sentence.tokens.size() != sentence.labels.size())
    throw DataError("token/label count mismatch");
  std::string prev = "O";
  for (const auto& label : sentence.labels) {
    bio_label_index(label);  // schema check
    if (label.rfind("I-", 0) == 0) {
      const std::string type = label.substr(2);
      const bool ok = prev == "B-" + type || prev == "I-" + type;
      if (!ok)
        throw DataError("invalid BIO transition " + prev + " -> " + label);
    }
    prev = label;
  }
}

std::vector<std::string> repair_bio(const std::vector<std::string>& tags) {
  std::vector<std::string> out = tags;
  std::string prev = "O";
  for (auto& tag : out) {
    if (tag.rfind("I-", 0) == 0) {
      const std::string type = tag.substr(2);
      if (prev != "B-" + type && prev != "I-" + type) tag = "B-" + type;
    }
    prev = tag;
  }
  return out;
}

std::vector<evalsuite::LabeledSpan> bio_to_spans(
    const std::vector<std::string>& tags) {
  std::vector<evalsuite::LabeledSpan> spans;
  std::int32_t start = -1;
  std::string type;
  auto flush = [&](std::int32_t end) {
    if (start >= 0) spans.push_back({start, end, type});
    start = -1;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& tag = tags[i];
    if (tag.rfind("B-", 0) == 0) {
      flush(static_cast<std::int32_t>(i));
      start = static_cast<std::int32_t>(i);
      type = tag.substr(2);
    } else if (tag.rfind("I-", 0) == 0 && start >= 0 && tag.substr(2) == type) {
      // span continues
    } else {
      flush(static_cast<std::int32_t>(i));
    }
  }
  flush(static_cast<std::int32_t>(tags.size()));
  return spans;
}

std::vector<TaggedSentence> load_conll(const std::string& path,
                                       const std::string& language) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CoNLL file: " + path);
  std::vector<TaggedSentence> sentences;
  TaggedSentence cur;
  cur.language = language;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!cur.tokens.empty()) {
        sentences.push_back(cur);
        cur.tokens.clear();
        cur.labels.clear();
      }
      continue;
    }
    const auto sep = line.find_last_of(" \t");
    if (sep == std::string::npos || sep == 0 || sep + 1 >= line.size())
      throw DataError(path + ": bad CoNLL line: " + line);
    cur.tokens.push_back(line.substr(0, sep));
    cur.labels.push_back(line.substr(sep + 1));
  }
  if (!cur.tokens.empty()) sentences.push_back(cur);
  return sentences;
}

void save_conll(const std::string& path,
                const std::vector<TaggedSentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CoNLL file: " + path);
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i] << "\t" << s.labels[i] << "\n";
    out << "\n";
  }
}

std::vector<StancePair> load_stance_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stance file: " + path);
  std::vector<StancePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      StancePair p;
      p.question = j.at("question").get<std::string>();
      p.comment = j.at("comment").get<std::string>();
      p.label = j.at("label").get<std::string>();
      p.language = j.at("language").get<std::string>();
      if (j.contains("partition"))
        p.partition = j.at("partition").get<std::string>();
      if (p.question.empty() || p.comment.empty())
        throw DataError("empty question or comment");
      if (p.label != "favor" && p.label != "against")
        throw DataError("unknown stance label: " + p.label);
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void save_stance_jsonl(const std::string& path,
                       const std::vector<StancePair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write stance file: " + path);
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["question"] = p.question;
    j["comment"] = p.comment;
    j["label"] = p.label;
    j["language"] = p.language;
    if (!p.partition.empty()) j["partition"] = p.partition;
    out << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// pair encoding

EncodedPair encode_pair(const std::string& question,
                        const std::string& comment,
                        const tok::Vocabulary& vocab, int max_len) {
  if (max_len < 6) throw ConfigError("max_len too small for the template");
  std::vector<std::int32_t> q_ids = tok::encode(question, vocab);
  std::vector<std::int32_t> c_ids = tok::encode(comment, vocab);
  const int overhead = 4;  // <s> </s></s> </s>
  const int budget = max_len - overhead;
  // truncate the comment first, but keep at least one comment token
  if (static_cast<int>(q_ids.size() + c_ids.size()) > budget) {
    const int c_keep = std::max(
        1, budget - static_cast<int>(q_ids.size()));
    if (static_cast<int>(c_ids.size()) > c_keep) c_ids.resize(c_keep);
    const int q_keep = budget - static_cast<int>(c_ids.size());
    if (static_cast<int>(q_ids.size()) > q_keep) q_ids.resize(q_keep);
  }
  EncodedPair out;
  out.ids.push_back(vocab.bos_id());
  out.ids.insert(out.ids.end(), q_ids.begin(), q_ids.end());
  out.ids.push_back(vocab.eos_id());
  out.ids.push_back(vocab.eos_id());
  out.segments.assign(out.ids.size(), 0);
  out.ids.insert(out.ids.end(), c_ids.begin(), c_ids.end());
  out.ids.push_back(vocab.eos_id());
  out.segments.resize(out.ids.size(), 1);
  return out;
}

// ---------------------------------------------------------------------------
// shared classification machinery

pretrain::TrainPlan FinetunePlan::as_train_plan() const {
  pretrain::TrainPlan plan;
  plan.peak_lr = lr;
  plan.warmup_steps = 0;
  plan.total_steps = 1;  // unused; finetuning runs at constant lr
  plan.batch_size = batch_size;
  plan.seed = seed;
  plan.adam_beta1 = adam_beta1;
  plan.adam_beta2 = adam_beta2;
  plan.adam_eps = adam_eps;
  plan.weight_decay = weight_decay;
  plan.clip_norm = clip_norm;
  return plan;
}

namespace {

struct Example {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::string lang;
  std::vector<std::int32_t> positions;  // supervised positions
  std::vector<std::int32_t> labels;     // parallel to positions
};

void ensure_head(model::ParamStore& params, const std::string& head,
                 std::int64_t classes, std::uint64_t seed) {
  const std::string wname = "head." + head + ".w";
  if (params.has(wname)) return;
  Tensor w({classes, params.config.hidden});
  Rng rng(Rng::mix(seed, 0x4EAD));
  w.fill_normal(rng, 0.02);
  params.add(wname, std::move(w), model::Partition::TaskHead);
  params.add("head." + head + ".b", Tensor({classes}),
             model::Partition::TaskHead);
}

// cross-entropy at the supervised positions through a linear head;
// accumulates gradients (loss sum convention) when grads != nullptr
std::pair<double, std::int64_t> head_loss(const model::ParamStore& params,
                                          const Example& ex,
                                          const std::string& head,
                                          model::GradStore* grads) {
  const std::int64_t H = params.config.hidden;
  const Tensor& w = params.at("head." + head + ".w");
  const Tensor& b = params.at("head." + head + ".b");
  const std::int64_t C = w.dim(0);

  model::ForwardCache cache;
  model::forward(params, ex.ids, ex.mask, ex.lang, &cache);
  const Tensor& final_hidden = cache.final_hidden();

  const auto N = static_cast<std::int64_t>(ex.positions.size());
  Tensor h_sel({N, H});
  for (std::int64_t i = 0; i < N; ++i) {
    const double* src =
        final_hidden.ptr() +
        static_cast<std::int64_t>(ex.positions[static_cast<std::size_t>(i)]) *
            H;
    std::copy(src, src + H, h_sel.ptr() + i * H);
  }
  Tensor logits({N, C});
  kern::linear_forward(h_sel.ptr(), w.ptr(), b.ptr(), logits.ptr(), N, H, C);
  Tensor probs({N, C});
  kern::softmax_rows(logits.ptr(), probs.ptr(), N, C);
  double loss_sum = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    const std::int32_t y = ex.labels[static_cast<std::size_t>(i)];
    loss_sum += -std::log(std::max(probs.ptr()[i * C + y], 1e-300));
  }
  if (grads) {
    Tensor dlogits = probs;
    for (std::int64_t i = 0; i < N; ++i)
      dlogits.ptr()[i * C + ex.labels[static_cast<std::size_t>(i)]] -= 1.0;
    Tensor dh_sel({N, H});
    kern::linear_backward_input(dlogits.ptr(), w.ptr(), dh_sel.ptr(), N, H, C);
    kern::linear_backward_params(
        dlogits.ptr(), h_sel.ptr(),
        grads->accum("head." + head + ".w", {C, H}).ptr(),
        grads->accum("head." + head + ".b", {C}).ptr(), N, H, C);
    Tensor d_final({static_cast<std::int64_t>(ex.ids.size()), H});
    for (std::int64_t i = 0; i < N; ++i) {
      double* dst =
          d_final.ptr() +
          static_cast<std::int64_t>(
              ex.positions[static_cast<std::size_t>(i)]) *
              H;
      const double* src = dh_sel.ptr() + i * H;
      for (std::int64_t c = 0; c < H; ++c) dst[c] += src[c];
    }
    model::encoder_backward(params, cache, d_final, grads);
  }
  return {loss_sum, N};
}

void train_examples(model::ParamStore& params, std::vector<Example> examples,
                    const std::string& head, const FinetunePlan& plan) {
  const auto train_plan = plan.as_train_plan();
  const auto trainable =
      model::apply_freeze_policy(params, model::FreezeMode::Finetune);
  pretrain::AdamW optimizer(train_plan);
  Rng rng(Rng::mix(plan.seed, 0xF17E));
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    // Fisher-Yates with the run's own stream
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(plan.batch_size)) {
      model::GradStore grads;
      std::int64_t label_count = 0;
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(plan.batch_size));
      for (std::size_t i = start; i < stop; ++i) {
        const auto [l, n] = head_loss(params, examples[order[i]], head, &grads);
        (void)l;
        label_count += n;
      }
      if (label_count == 0) continue;
      optimizer.step(params, grads, trainable, plan.lr,
                     1.0 / static_cast<double>(label_count));
    }
  }
}

Example tagger_example(const tok::Vocabulary& vocab,
                       const TaggedSentence& sentence) {
  Example ex;
  ex.lang = sentence.language;
  ex.ids.push_back(vocab.bos_id());
  for (std::size_t w = 0; w < sentence.tokens.size(); ++w) {
    std::vector<tok::WordSpan> spans;
    const auto ids = tok::encode(sentence.tokens[w], vocab, &spans);
    if (ids.empty()) continue;
    // label on the first subword, continuations ignored
    ex.positions.push_back(static_cast<std::int32_t>(ex.ids.size()));
    if (!sentence.labels.empty())
      ex.labels.push_back(bio_label_index(sentence.labels[w]));
    ex.ids.insert(ex.ids.end(), ids.begin(), ids.end());
  }
  ex.ids.push_back(vocab.eos_id());
  ex.mask.assign(ex.ids.size(), 1);
  return ex;
}

bool has_adapter(const model::ParamStore& params, const std::string& lang) {
  return params.has("layer.00.adapter." + lang + ".down.w");
}

}  // namespace

void train_tagger(model::ParamStore& params, const tok::Vocabulary& vocab,
                  const std::vector<TaggedSentence>& data,
                  const FinetunePlan& plan) {
  ensure_head(params, "tagger",
              static_cast<std::int64_t>(bio_label_set().size()), plan.seed);
  std::vector<Example> examples;
  for (const auto& s : data) {
    validate_tagged(s);
    if (!has_adapter(params, s.language))
      throw RoutingError("no adapter for training language: " + s.language);
    Example ex = tagger_example(vocab, s);
    if (!ex.positions.empty()) examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw EmptyCorpus("no usable tagged sentences");
  train_examples(params, std::move(examples), "tagger", plan);
}

std::vector<std::string> tag_sentence(const model::ParamStore& params,
                                      const tok::Vocabulary& vocab,
                                      const std::vector<std::string>& tokens,
                                      const std::string& adapter_lang) {
  TaggedSentence s;
  s.tokens = tokens;
  s.language = adapter_lang;
  const Example ex = tagger_example(vocab, s);
  const std::int64_t H = params.config.hidden;
  const Tensor& w = params.at("head.tagger.w");
  const Tensor& b = params.at("head.tagger.b");
  const std::int64_t C = w.dim(0);

  model::ForwardCache cache;
  model::forward(params, ex.ids, ex.mask, adapter_lang, &cache);
  const Tensor& final_hidden = cache.final_hidden();
  std::vector<std::string> tags;
  for (const auto pos : ex.positions) {
    std::vector<double> logits(static_cast<std::size_t>(C), 0.0);
    kern::linear_forward_ref(final_hidden.ptr() +
                                 static_cast<std::int64_t>(pos) * H,
                             w.ptr(), b.ptr(), logits.data(), 1, H, C);
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < C; ++c)
      if (logits[static_cast<std::size_t>(c)] >
          logits[static_cast<std::size_t>(best)])
        best = c;
    tags.push_back(bio_label_set()[static_cast<std::size_t>(best)]);
  }
  // words that tokenized to nothing keep O so the output stays aligned
  if (tags.size() != tokens.size()) {
    std::vector<std::string> full(tokens.size(), "O");
    std::size_t next = 0;
    for (std::size_t w2 = 0; w2 < tokens.size() && next < tags.size(); ++w2) {
      if (!tok::encode(tokens[w2], vocab).empty()) full[w2] = tags[next++];
    }
    return repair_bio(full);
  }
  return repair_bio(tags);
}

std::vector<std::vector<std::string>> zero_shot_tag(
    const model::ParamStore& params, const tok::Vocabulary& vocab,
    const std::vector<std::vector<std::string>>& sentences,
    const std::string& target_lang,
    const std::optional<std::string>& adapter_override) {
  std::string adapter = target_lang;
  if (!has_adapter(params, adapter)) {
    if (!adapter_override || !has_adapter(params, *adapter_override))
      throw RoutingError("no adapter for " + target_lang +
                         " and no usable override");
    adapter = *adapter_override;
  }
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences.size());
  for (const auto& tokens : sentences)
    out.push_back(tag_sentence(params, vocab, tokens, adapter));
  return out;
}

void train_pair_classifier(model::ParamStore& params,
                           const tok::Vocabulary& vocab,
                           const std::vector<StancePair>& pairs,
                           const FinetunePlan& plan) {
  ensure_head(params, "pair", 2, plan.seed);
  std::vector<Example> examples;
  for (const auto& p : pairs) {
    if (!has_adapter(params, p.language))
      throw RoutingError("no adapter for training language: " + p.language);
    Example ex;
    const EncodedPair enc = encode_pair(p.question, p.comment, vocab);
    ex.ids = enc.ids;
    ex.mask.assign(ex.ids.size(), 1);
    ex.lang = p.language;
    ex.positions = {0};  // the <s> position
    ex.labels = {p.label == "favor" ? 1 : 0};
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw EmptyCorpus("no stance pairs");
  train_examples(params, std::move(examples), "pair", plan);
}

std::string classify_pair(const model::ParamStore& params,
                          const tok::Vocabulary& vocab,
                          const std::string& question,
                          const std::string& comment,
                          const std::string& adapter_lang, int max_len) {
  const EncodedPair enc = encode_pair(question, comment, vocab, max_len);
  std::vector<std::uint8_t> mask(enc.ids.size(), 1);
  model::ForwardCache cache;
  model::forward(params, enc.ids, mask, adapter_lang, &cache);
  const Tensor& w = params.at("head.pair.w");
  const Tensor& b = params.at("head.pair.b");
  const std::int64_t H = params.config.hidden;
  double logits[2];
  kern::linear_forward_ref(cache.final_hidden().ptr(), w.ptr(), b.ptr(),
                           logits, 1, H, 2);
  return logits[1] > logits[0] ? "favor" : "against";
}

}  // namespace modlm::finetune
