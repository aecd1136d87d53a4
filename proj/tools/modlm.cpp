// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0
//
// Single binary exposing the pipeline as subcommands. Every run writes its
// effective config into <out>/manifest.json; re-running with the same
// manifest reproduces byte-identical primary outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "modlm/corpus.hpp"
#include "modlm/evalsuite.hpp"
#include "modlm/finetune.hpp"
#include "modlm/kernels.hpp"
#include "modlm/model.hpp"
#include "modlm/pretrain.hpp"
#include "modlm/runconfig.hpp"
#include "modlm/text.hpp"
#include "modlm/unigram_trainer.hpp"
#include "modlm/version.hpp"
#include "modlm/vocab.hpp"
#include "modlm/vocab_analysis.hpp"

namespace fs = std::filesystem;
using modlm::cli::RunConfig;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = -1;  // -1 = take from config
};

RunConfig effective_config(const CommonArgs& args) {
  RunConfig config;
  if (!args.config_path.empty())
    config = modlm::cli::parse_config_file(args.config_path);
  for (const auto& o : args.overrides) modlm::cli::apply_override(config, o);
  if (args.threads >= 0) config.threads = args.threads;
  config.validate();
  if (config.threads > 0) modlm::kern::set_threads(config.threads);
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." :
                         path.parent_path().string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw modlm::IoError("cannot write " + path.string());
  out << content;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const RunConfig& config) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = modlm::kVersion;
  j["config"] = nlohmann::ordered_json::parse(config.to_manifest_json());
  fs::create_directories(dir);
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

modlm::corpus::Corpus load_corpus(const RunConfig& config,
                                  const std::string& corpus_flag) {
  std::vector<std::string> paths = config.corpus.paths;
  if (!corpus_flag.empty()) paths = {corpus_flag};
  if (paths.empty())
    throw modlm::ConfigError("no corpus path given (corpus.paths or --corpus)");
  if (config.corpus.languages.empty())
    throw modlm::ConfigError("corpus.languages must be configured");
  modlm::corpus::Corpus merged;
  merged.languages = config.corpus.languages;
  merged.cutoff_year = config.corpus.cutoff_year;
  for (const auto& p : paths) {
    auto part = modlm::corpus::load_jsonl(p, config.corpus.languages,
                                          config.corpus.cutoff_year);
    for (auto& d : part.docs) merged.docs.push_back(std::move(d));
  }
  return merged;
}

modlm::model::ModelConfig model_config_from(const RunConfig& config,
                                            std::int64_t vocab_size) {
  modlm::model::ModelConfig mc;
  mc.vocab_size = vocab_size > 0 ? vocab_size : config.model.vocab_size;
  mc.hidden = config.model.hidden;
  mc.layers = config.model.layers;
  mc.heads = config.model.heads;
  mc.ffn_dim = config.model.ffn_dim;
  mc.adapter_bottleneck = config.model.adapter_bottleneck;
  mc.max_positions = config.model.max_positions;
  mc.include_pooler = config.model.include_pooler;
  mc.padding_offset = config.model.padding_offset;
  mc.languages = config.corpus.languages;
  return mc;
}

modlm::pretrain::TrainPlan train_plan_from(const RunConfig& config) {
  modlm::pretrain::TrainPlan plan;
  plan.peak_lr = config.pretrain.peak_lr;
  plan.warmup_steps = config.pretrain.warmup_steps;
  plan.total_steps = config.pretrain.total_steps;
  plan.batch_size = config.pretrain.batch_size;
  plan.accumulation = config.pretrain.accumulation;
  plan.mask_prob = config.pretrain.mask_prob;
  plan.mask_split_mask = config.pretrain.mask_split_mask;
  plan.mask_split_random = config.pretrain.mask_split_random;
  plan.mask_split_keep = config.pretrain.mask_split_keep;
  plan.freeze_mode = modlm::model::parse_freeze_mode(config.pretrain.freeze);
  plan.seed = config.pretrain.seed;
  return plan;
}

std::vector<std::pair<std::string, std::string>> parse_lang_files(
    const std::vector<std::string>& specs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw modlm::ConfigError("expected lang=path, got " + s);
    out.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> load_parallel_tsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw modlm::IoError("cannot open parallel corpus: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw modlm::DataError(path + ":" + std::to_string(line_no) +
                             ": expected source<TAB>target");
    pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (pairs.empty()) throw modlm::EmptyCorpus("no sentence pairs in " + path);
  return pairs;
}

std::string prf_json(const modlm::evalsuite::PRF& prf) {
  nlohmann::ordered_json j;
  j["precision"] = prf.precision;
  j["recall"] = prf.recall;
  j["f1"] = prf.f1;
  return j.dump();
}

// ---------------------------------------------------------------------------
// subcommand bodies

int cmd_prep(const CommonArgs& common, const std::string& corpus_flag) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  const auto split =
      modlm::corpus::holdout_split(corpus, config.corpus.holdout_min);
  modlm::corpus::Corpus train, validation;
  train.languages = validation.languages = corpus.languages;
  train.cutoff_year = validation.cutoff_year = corpus.cutoff_year;
  for (auto i : split.train) train.docs.push_back(corpus.docs[i]);
  for (auto i : split.validation) validation.docs.push_back(corpus.docs[i]);
  const fs::path out = common.out_dir;
  write_manifest(out, "prep", config);
  modlm::corpus::save_jsonl((out / "train.jsonl").string(), train);
  modlm::corpus::save_jsonl((out / "validation.jsonl").string(), validation);
  std::cout << "prep: " << train.docs.size() << " train / "
            << validation.docs.size() << " validation documents\n";
  return 0;
}

int cmd_stats(const CommonArgs& common, const std::string& corpus_flag,
              const std::string& vocab_path) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  const auto stats = modlm::corpus::corpus_stats(
      corpus,
      [&vocab](const std::string& text) {
        return static_cast<std::int64_t>(modlm::tok::encode(text, vocab).size());
      },
      vocab.id_string());
  const fs::path out = common.out_dir;
  write_manifest(out, "stats", config);
  write_file(out / "stats.tsv", modlm::corpus::stats_to_tsv(stats));
  std::cout << modlm::corpus::stats_to_tsv(stats);
  return 0;
}

int cmd_overlap(const CommonArgs& common, const std::string& corpus_flag,
                const std::string& probes_path) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  std::ifstream in(probes_path);
  if (!in) throw modlm::IoError("cannot open probes file: " + probes_path);
  std::vector<std::string> probes;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) probes.push_back(line);
  const auto report = modlm::corpus::overlap_audit(probes, corpus);
  nlohmann::ordered_json j;
  j["total_probes"] = probes.size();
  j["matches"] = report.match_count;
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < probes.size(); ++i)
    arr.push_back(nlohmann::ordered_json{{"probe", probes[i]},
                                         {"matched", (bool)report.matched[i]}});
  j["per_probe"] = std::move(arr);
  const fs::path out = common.out_dir;
  write_manifest(out, "overlap", config);
  write_file(out / "overlap.json", j.dump(2) + "\n");
  std::cout << "overlap: " << report.match_count << " of " << probes.size()
            << " probes found verbatim\n";
  return 0;
}

int cmd_vocab_train(const CommonArgs& common, const std::string& corpus_flag) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  // smoothed language sampling over cleaned documents
  std::vector<std::string> sentences;
  if (config.vocab.sample_sentences > 0) {
    const auto picks = modlm::corpus::sample_documents(
        corpus, config.vocab.alpha, config.vocab.seed,
        static_cast<std::size_t>(config.vocab.sample_sentences));
    for (auto i : picks)
      sentences.push_back(modlm::corpus::clean_document(corpus.docs[i]));
  } else {
    for (const auto& doc : corpus.docs)
      sentences.push_back(modlm::corpus::clean_document(doc));
  }
  modlm::tok::TrainerOptions options;
  options.target_size = config.vocab.size;
  options.coverage = config.vocab.coverage;
  options.seed = config.vocab.seed;
  options.seed_multiplier = config.vocab.seed_multiplier;
  options.prune_fraction = config.vocab.prune_fraction;
  options.em_iters_per_round = config.vocab.em_iters;
  options.max_piece_len = config.vocab.max_piece_len;
  options.alpha = config.vocab.alpha;
  options.metadata_tokens = config.corpus.variant == "new_vocab";
  const auto vocab = modlm::tok::train_unigram(sentences, options);
  const fs::path out = common.out_dir;
  write_manifest(out, "vocab-train", config);
  vocab.save_tsv((out / "vocab.tsv").string());
  std::cout << "vocab-train: " << vocab.num_pieces() << " pieces + "
            << vocab.num_specials() << " specials\n";
  return 0;
}

int cmd_tokenize(const CommonArgs& common, const std::string& vocab_path,
                 const std::string& text, const std::string& input_path,
                 bool as_ids) {
  (void)common;
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  std::vector<std::string> lines;
  if (!input_path.empty()) {
    std::ifstream in(input_path);
    if (!in) throw modlm::IoError("cannot open input file: " + input_path);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  } else {
    lines.push_back(text);
  }
  for (const auto& line : lines) {
    const auto ids = modlm::tok::encode(line, vocab);
    std::ostringstream row;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) row << " ";
      if (as_ids) {
        row << ids[i];
      } else if (vocab.is_special(ids[i])) {
        row << vocab.special_name(ids[i]);
      } else {
        row << vocab.piece(ids[i]).surface;
      }
    }
    std::cout << row.str() << "\n";
  }
  return 0;
}

int cmd_params(const CommonArgs& common) {
  const RunConfig config = effective_config(common);
  const auto mc = model_config_from(config, config.model.vocab_size);
  const auto count = modlm::model::count_params(mc);
  nlohmann::ordered_json j;
  j["total"] = count.total;
  j["with_mlm_head"] = count.with_mlm_head;
  j["embeddings"] = count.embeddings;
  j["shared_body"] = count.shared_body;
  j["per_adapter"] = count.per_adapter;
  j["adapters"] = count.adapters;
  j["mlm_head"] = count.mlm_head;
  j["note"] =
      "total follows the tied-embeddings convention: the MLM head is "
      "excluded and reported separately";
  for (const auto mode : {modlm::model::FreezeMode::AdaptPretrainV1,
                          modlm::model::FreezeMode::AdaptPretrainV2,
                          modlm::model::FreezeMode::Finetune}) {
    j["trainable"][modlm::model::freeze_mode_name(mode)] =
        modlm::model::trainable_param_count(mc, mode);
  }
  std::cout << count.total << "\n";
  if (!common.out_dir.empty()) {
    const fs::path out = common.out_dir;
    write_manifest(out, "params", config);
    write_file(out / "params.json", j.dump(2) + "\n");
  } else {
    std::cerr << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_pretrain(const CommonArgs& common, const std::string& corpus_flag,
                 const std::string& vocab_path,
                 const std::string& init_checkpoint) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  const auto split =
      modlm::corpus::holdout_split(corpus, config.corpus.holdout_min);
  const auto variant = modlm::corpus::parse_prefix_variant(config.corpus.variant);

  const auto train_tc = modlm::pretrain::tokenize_corpus(
      corpus, split.train, vocab, variant, /*add_prefix=*/true);
  const auto val_tc = modlm::pretrain::tokenize_corpus(
      corpus, split.validation, vocab, variant, /*add_prefix=*/true);

  modlm::model::ParamStore params;
  if (!init_checkpoint.empty()) {
    params = modlm::model::load_checkpoint(init_checkpoint);
  } else {
    params = modlm::model::build_model(model_config_from(config, vocab.size()),
                                       config.model.init_seed);
  }
  const auto plan = train_plan_from(config);
  const auto sampler = modlm::pretrain::make_corpus_sampler(
      train_tc, config.corpus.alpha, config.pretrain.span, vocab.pad_id());
  const auto validation = modlm::pretrain::make_validation_set(
      val_tc, config.pretrain.span, vocab.pad_id());

  const double ppl0 = modlm::pretrain::validation_perplexity(
      params, vocab, validation, config.pretrain.mask_seed, plan);
  const auto result = modlm::pretrain::train(params, vocab, sampler, plan);
  const double ppl1 = modlm::pretrain::validation_perplexity(
      params, vocab, validation, config.pretrain.mask_seed, plan);

  const fs::path out = common.out_dir;
  write_manifest(out, "pretrain", config);
  write_file(out / "loss_curve.tsv", modlm::pretrain::curve_to_tsv(result));
  modlm::model::save_checkpoint((out / "checkpoint").string(), params);
  nlohmann::ordered_json j;
  j["validation_ppl_step0"] = ppl0;
  j["validation_ppl_final"] = ppl1;
  j["steps"] = result.curve.size();
  write_file(out / "metrics.json", j.dump(2) + "\n");
  std::cout << "pretrain: validation ppl " << ppl0 << " -> " << ppl1 << "\n";
  return 0;
}

int cmd_init_exp(const CommonArgs& common, const std::string& corpus_flag,
                 const std::string& vocab_path, const std::string& checkpoint,
                 const std::string& target, const std::string& copy_from,
                 const std::string& average_from, int random_runs, int steps) {
  const RunConfig config = effective_config(common);
  const auto corpus = load_corpus(config, corpus_flag);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  auto params = modlm::model::load_checkpoint(checkpoint);
  const auto variant = modlm::corpus::parse_prefix_variant(config.corpus.variant);
  const auto split =
      modlm::corpus::holdout_split(corpus, config.corpus.holdout_min);

  // the harness trains and validates on the target language only
  std::vector<std::size_t> train_target, val_target;
  for (auto i : split.train)
    if (corpus.docs[i].language == target) train_target.push_back(i);
  for (auto i : split.validation)
    if (corpus.docs[i].language == target) val_target.push_back(i);
  if (train_target.empty() || val_target.empty())
    throw modlm::DataError("no documents for target language " + target);

  const auto train_tc = modlm::pretrain::tokenize_corpus(
      corpus, train_target, vocab, variant, true);
  const auto val_tc = modlm::pretrain::tokenize_corpus(
      corpus, val_target, vocab, variant, true);
  const auto sampler = modlm::pretrain::make_corpus_sampler(
      train_tc, config.corpus.alpha, config.pretrain.span, vocab.pad_id());
  const auto validation = modlm::pretrain::make_validation_set(
      val_tc, config.pretrain.span, vocab.pad_id());

  std::vector<modlm::pretrain::InitStrategySpec> named;
  if (!copy_from.empty()) {
    modlm::model::AdapterInit init;
    init.kind = modlm::model::AdapterInit::Kind::Copy;
    init.sources = {copy_from};
    named.push_back({"copy(" + copy_from + ")", init});
  }
  if (!average_from.empty()) {
    modlm::model::AdapterInit init;
    init.kind = modlm::model::AdapterInit::Kind::Average;
    std::istringstream in(average_from);
    std::string lang;
    while (std::getline(in, lang, ','))
      if (!lang.empty()) init.sources.push_back(lang);
    named.push_back({"average(" + average_from + ")", init});
  }
  const auto plan = train_plan_from(config);
  const auto result = modlm::pretrain::init_experiment(
      params, vocab, target, named, random_runs, config.model.init_seed + 1,
      steps, plan, sampler, validation, config.pretrain.mask_seed);
  const fs::path out = common.out_dir;
  write_manifest(out, "init-exp", config);
  write_file(out / "init_experiment.tsv",
             modlm::pretrain::init_experiment_table(result));
  std::cout << modlm::pretrain::init_experiment_table(result);
  return 0;
}

int cmd_finetune_ner(const CommonArgs& common, const std::string& vocab_path,
                     const std::string& checkpoint,
                     const std::vector<std::string>& train_specs, bool hipe) {
  const RunConfig config = effective_config(common);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  auto params = modlm::model::load_checkpoint(checkpoint);
  std::vector<modlm::finetune::TaggedSentence> data;
  for (const auto& [lang, path] : parse_lang_files(train_specs)) {
    auto part = modlm::finetune::load_conll(path, lang);
    for (auto& s : part) data.push_back(std::move(s));
  }
  modlm::finetune::FinetunePlan plan;
  plan.lr = hipe ? config.finetune.hipe_lr : config.finetune.ner_lr;
  plan.batch_size =
      hipe ? config.finetune.hipe_batch_size : config.finetune.ner_batch_size;
  plan.epochs = hipe ? config.finetune.hipe_epochs : config.finetune.ner_epochs;
  plan.seed = config.finetune.seed;
  modlm::finetune::train_tagger(params, vocab, data, plan);
  const fs::path out = common.out_dir;
  write_manifest(out, "finetune-ner", config);
  modlm::model::save_checkpoint((out / "checkpoint").string(), params);
  std::cout << "finetune-ner: trained on " << data.size() << " sentences\n";
  return 0;
}

int cmd_finetune_pair(const CommonArgs& common, const std::string& vocab_path,
                      const std::string& checkpoint,
                      const std::string& train_path) {
  const RunConfig config = effective_config(common);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  auto params = modlm::model::load_checkpoint(checkpoint);
  const auto pairs = modlm::finetune::load_stance_jsonl(train_path);
  modlm::finetune::FinetunePlan plan;
  plan.lr = config.finetune.stance_lr;
  plan.batch_size = config.finetune.stance_batch_size;
  plan.epochs = config.finetune.stance_epochs;
  plan.seed = config.finetune.seed;
  modlm::finetune::train_pair_classifier(params, vocab, pairs, plan);
  const fs::path out = common.out_dir;
  write_manifest(out, "finetune-pair", config);
  modlm::model::save_checkpoint((out / "checkpoint").string(), params);
  std::cout << "finetune-pair: trained on " << pairs.size() << " pairs\n";
  return 0;
}

int cmd_eval_ner(const CommonArgs& common, const std::string& vocab_path,
                 const std::string& checkpoint,
                 const std::vector<std::string>& test_specs,
                 const std::string& adapter_override) {
  const RunConfig config = effective_config(common);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  const auto params = modlm::model::load_checkpoint(checkpoint);
  nlohmann::ordered_json j;
  for (const auto& [lang, path] : parse_lang_files(test_specs)) {
    const auto data = modlm::finetune::load_conll(path, lang);
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::vector<modlm::evalsuite::LabeledSpan>> gold;
    for (const auto& s : data) {
      modlm::finetune::validate_tagged(s);
      sentences.push_back(s.tokens);
      gold.push_back(modlm::finetune::bio_to_spans(s.labels));
    }
    const auto predictions = modlm::finetune::zero_shot_tag(
        params, vocab, sentences, lang,
        adapter_override.empty()
            ? std::nullopt
            : std::optional<std::string>(adapter_override));
    std::vector<std::vector<modlm::evalsuite::LabeledSpan>> pred;
    for (const auto& tags : predictions)
      pred.push_back(modlm::finetune::bio_to_spans(tags));
    const auto prf = modlm::evalsuite::span_f1_strict(gold, pred);
    j[lang] = nlohmann::ordered_json::parse(prf_json(prf));
    std::cout << "eval-ner " << lang << ": F1 " << prf.f1 << "\n";
  }
  const fs::path out = common.out_dir;
  write_manifest(out, "eval-ner", config);
  write_file(out / "ner_eval.json", j.dump(2) + "\n");
  return 0;
}

int cmd_retrieve(const CommonArgs& common, const std::string& vocab_path,
                 const std::string& checkpoint, const std::string& pairs_path,
                 const std::string& src_lang, const std::string& tgt_lang) {
  const RunConfig config = effective_config(common);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  const auto params = modlm::model::load_checkpoint(checkpoint);
  const auto pairs = load_parallel_tsv(pairs_path);
  std::vector<modlm::Tensor> queries, candidates;
  for (const auto& [src, tgt] : pairs) {
    queries.push_back(modlm::evalsuite::layer_avg_embed(
        params, vocab, src, src_lang, config.eval.include_embedding_layer));
    candidates.push_back(modlm::evalsuite::layer_avg_embed(
        params, vocab, tgt, tgt_lang, config.eval.include_embedding_layer));
  }
  const auto result = modlm::evalsuite::retrieve(queries, candidates);
  nlohmann::ordered_json j;
  j["pairs"] = pairs.size();
  j["top1_accuracy"] = result.accuracy;
  j["top1"] = result.top1;
  const fs::path out = common.out_dir;
  write_manifest(out, "retrieve", config);
  write_file(out / "retrieval.json", j.dump(2) + "\n");
  std::cout << "retrieve: top-1 accuracy " << result.accuracy << " over "
            << pairs.size() << " pairs\n";
  return 0;
}

int cmd_align(const CommonArgs& common, const std::string& vocab_path,
              const std::string& checkpoint, const std::string& pairs_path,
              const std::string& src_lang, const std::string& tgt_lang,
              const std::string& gold_path) {
  const RunConfig config = effective_config(common);
  const auto vocab = modlm::tok::Vocabulary::load_tsv(vocab_path);
  const auto params = modlm::model::load_checkpoint(checkpoint);
  const auto pairs = load_parallel_tsv(pairs_path);
  std::vector<modlm::evalsuite::AlignmentSet> predictions;
  std::ostringstream aligned;
  for (const auto& [src, tgt] : pairs) {
    const auto sv = modlm::evalsuite::word_vectors(
        params, vocab, src, src_lang, config.eval.include_embedding_layer);
    const auto tv = modlm::evalsuite::word_vectors(
        params, vocab, tgt, tgt_lang, config.eval.include_embedding_layer);
    predictions.push_back(modlm::evalsuite::simalign_match(sv, tv));
    aligned << modlm::evalsuite::to_pharaoh(predictions.back()) << "\n";
  }
  nlohmann::ordered_json j;
  j["pairs"] = pairs.size();
  if (!gold_path.empty()) {
    std::ifstream in(gold_path);
    if (!in) throw modlm::IoError("cannot open gold alignments: " + gold_path);
    std::vector<modlm::evalsuite::AlignmentSet> gold;
    std::string line;
    while (std::getline(in, line)) gold.push_back(
        modlm::evalsuite::parse_pharaoh(line));
    if (gold.size() != pairs.size())
      throw modlm::DataError("gold alignment count differs from pair count");
    // micro-averaged over the corpus
    modlm::evalsuite::AlignmentSet all_pred, all_gold;
    std::int32_t offset = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (const auto& [a, b] : predictions[i].pairs)
        all_pred.pairs.insert({a + offset, b + offset});
      for (const auto& [a, b] : gold[i].pairs)
        all_gold.pairs.insert({a + offset, b + offset});
      offset += 10000;  // sentence separation
    }
    const auto prf = modlm::evalsuite::alignment_f1(all_pred, all_gold);
    j["alignment"] = nlohmann::ordered_json::parse(prf_json(prf));
    std::cout << "align: F1 " << prf.f1 << " over " << pairs.size()
              << " pairs\n";
  } else {
    std::cout << "align: predicted alignments for " << pairs.size()
              << " pairs\n";
  }
  const fs::path out = common.out_dir;
  write_manifest(out, "align", config);
  write_file(out / "alignments.txt", aligned.str());
  write_file(out / "align.json", j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modular multilingual masked language model toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "config file (TOML subset)");
  app.add_option("--set", common.overrides,
                 "override config values, section.key=value (flags win)");
  app.add_option("--out", common.out_dir, "run output directory")
      ->default_val("run");
  app.add_option("--threads", common.threads, "worker thread cap");

  std::string corpus_flag, vocab_path, probes_path, text, input_path;
  std::string checkpoint, init_checkpoint, target, copy_from, average_from;
  std::string train_path, adapter_override, pairs_path, src_lang, tgt_lang;
  std::string gold_path;
  std::vector<std::string> lang_files;
  bool as_ids = false;
  bool hipe = false;
  int random_runs = 3;
  int steps = 200;

  auto* prep = app.add_subcommand("prep", "clean corpus and split holdout");
  prep->add_option("--corpus", corpus_flag, "corpus JSONL file");

  auto* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("--corpus", corpus_flag, "corpus JSONL file");
  stats->add_option("--vocab", vocab_path, "vocabulary TSV")->required();

  auto* overlap = app.add_subcommand("overlap", "verbatim overlap audit");
  overlap->add_option("--corpus", corpus_flag, "corpus JSONL file");
  overlap->add_option("--probes", probes_path, "probe sentences, one per line")
      ->required();

  auto* vocab_train =
      app.add_subcommand("vocab-train", "train the unigram vocabulary");
  vocab_train->add_option("--corpus", corpus_flag, "corpus JSONL file");

  auto* tokenize = app.add_subcommand("tokenize", "segment text");
  tokenize->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  tokenize->add_option("--text", text, "text to segment");
  tokenize->add_option("--input", input_path, "file with one line per text");
  tokenize->add_flag("--ids", as_ids, "print ids instead of pieces");

  auto* params_cmd = app.add_subcommand("params", "parameter accounting");

  auto* pretrain_cmd = app.add_subcommand("pretrain", "masked LM training");
  pretrain_cmd->add_option("--corpus", corpus_flag, "corpus JSONL file");
  pretrain_cmd->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  pretrain_cmd->add_option("--init-checkpoint", init_checkpoint,
                           "continue from this checkpoint");

  auto* init_exp = app.add_subcommand("init-exp",
                                      "adapter initialization harness");
  init_exp->add_option("--corpus", corpus_flag, "corpus JSONL file");
  init_exp->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  init_exp->add_option("--checkpoint", checkpoint, "base model")->required();
  init_exp->add_option("--target", target, "target language")->required();
  init_exp->add_option("--copy-from", copy_from, "copy strategy source");
  init_exp->add_option("--average-from", average_from,
                       "comma-separated average sources");
  init_exp->add_option("--random-runs", random_runs, "random seeds to try");
  init_exp->add_option("--steps", steps, "adapter training steps");

  auto* ft_ner = app.add_subcommand("finetune-ner", "train the tagger");
  ft_ner->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  ft_ner->add_option("--checkpoint", checkpoint, "pretrained model")
      ->required();
  ft_ner->add_option("--train", lang_files, "lang=path CoNLL files")
      ->required();
  ft_ner->add_flag("--hipe", hipe, "use the historical-news preset");

  auto* ft_pair = app.add_subcommand("finetune-pair",
                                     "train the pair classifier");
  ft_pair->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  ft_pair->add_option("--checkpoint", checkpoint, "pretrained model")
      ->required();
  ft_pair->add_option("--train", train_path, "stance JSONL")->required();

  auto* eval_ner = app.add_subcommand("eval-ner", "span F1 evaluation");
  eval_ner->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  eval_ner->add_option("--checkpoint", checkpoint, "fine-tuned model")
      ->required();
  eval_ner->add_option("--test", lang_files, "lang=path CoNLL files")
      ->required();
  eval_ner->add_option("--adapter-override", adapter_override,
                       "adapter to use when the language has none");

  auto* retrieve_cmd = app.add_subcommand("retrieve", "sentence retrieval");
  retrieve_cmd->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  retrieve_cmd->add_option("--checkpoint", checkpoint, "model")->required();
  retrieve_cmd->add_option("--pairs", pairs_path, "parallel TSV")->required();
  retrieve_cmd->add_option("--src-lang", src_lang, "query language")
      ->required();
  retrieve_cmd->add_option("--tgt-lang", tgt_lang, "candidate language")
      ->required();

  auto* align = app.add_subcommand("align", "word alignment");
  align->add_option("--vocab", vocab_path, "vocabulary TSV")->required();
  align->add_option("--checkpoint", checkpoint, "model")->required();
  align->add_option("--pairs", pairs_path, "parallel TSV")->required();
  align->add_option("--src-lang", src_lang, "source language")->required();
  align->add_option("--tgt-lang", tgt_lang, "target language")->required();
  align->add_option("--gold", gold_path, "gold alignments (Pharaoh)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (prep->parsed()) return cmd_prep(common, corpus_flag);
    if (stats->parsed()) return cmd_stats(common, corpus_flag, vocab_path);
    if (overlap->parsed()) return cmd_overlap(common, corpus_flag, probes_path);
    if (vocab_train->parsed()) return cmd_vocab_train(common, corpus_flag);
    if (tokenize->parsed())
      return cmd_tokenize(common, vocab_path, text, input_path, as_ids);
    if (params_cmd->parsed()) return cmd_params(common);
    if (pretrain_cmd->parsed())
      return cmd_pretrain(common, corpus_flag, vocab_path, init_checkpoint);
    if (init_exp->parsed())
      return cmd_init_exp(common, corpus_flag, vocab_path, checkpoint, target,
                          copy_from, average_from, random_runs, steps);
    if (ft_ner->parsed())
      return cmd_finetune_ner(common, vocab_path, checkpoint, lang_files,
                              hipe);
    if (ft_pair->parsed())
      return cmd_finetune_pair(common, vocab_path, checkpoint, train_path);
    if (eval_ner->parsed())
      return cmd_eval_ner(common, vocab_path, checkpoint, lang_files,
                          adapter_override);
    if (retrieve_cmd->parsed())
      return cmd_retrieve(common, vocab_path, checkpoint, pairs_path, src_lang,
                          tgt_lang);
    if (align->parsed())
      return cmd_align(common, vocab_path, checkpoint, pairs_path, src_lang,
                       tgt_lang, gold_path);
  } catch (const modlm::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const modlm::Error& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
