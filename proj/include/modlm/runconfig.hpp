// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_RUNCONFIG_HPP
#define MODLM_RUNCONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "modlm/error.hpp"

namespace modlm::cli {

// One declarative config file drives every subcommand. Defaults carry the
// values cited for the reference pipeline; unknown keys are rejected.
struct RunConfig {
  struct Corpus {
    std::vector<std::string> paths;
    std::vector<std::string> languages;
    double alpha = 0.3;
    int holdout_min = 200;
    int cutoff_year = 2022;
    std::string variant = "new_vocab";  // metadata prefix style
  } corpus;

  struct Vocab {
    int size = 50000;
    double coverage = 0.9995;
    std::uint64_t seed = 1;
    double seed_multiplier = 20.0;
    double prune_fraction = 0.25;
    int em_iters = 2;
    int max_piece_len = 16;
    double alpha = 0.3;
    std::int64_t sample_sentences = 0;  // 0 = use everything
  } vocab;

  struct Model {
    std::int64_t vocab_size = 250002;
    std::int64_t hidden = 768;
    std::int64_t layers = 12;
    std::int64_t heads = 12;
    std::int64_t ffn_dim = 3072;
    std::int64_t adapter_bottleneck = 384;
    std::int64_t max_positions = 514;
    bool include_pooler = true;
    int padding_offset = 2;
    std::uint64_t init_seed = 1;
  } model;

  struct Pretrain {
    double peak_lr = 7e-4;
    int warmup_steps = 100;
    int total_steps = 1000;
    int batch_size = 8;
    int accumulation = 1;
    int span = 512;
    double mask_prob = 0.15;
    double mask_split_mask = 0.8;
    double mask_split_random = 0.1;
    double mask_split_keep = 0.1;
    std::string freeze = "adapt_pretrain_v2";
    std::uint64_t seed = 1;
    std::uint64_t mask_seed = 99;  // validation masking
  } pretrain;

  struct Finetune {
    // per-task defaults from the reference runs
    double ner_lr = 2e-5;
    int ner_batch_size = 16;
    int ner_epochs = 3;
    double hipe_lr = 5e-5;
    int hipe_batch_size = 8;
    int hipe_epochs = 25;
    double stance_lr = 1e-5;
    int stance_batch_size = 16;
    int stance_epochs = 3;
    int pair_max_len = 256;
    std::uint64_t seed = 1;
  } finetune;

  struct Eval {
    bool include_embedding_layer = true;
  } eval;

  int threads = 0;  // 0 = library default

  void validate() const;
  std::string to_manifest_json() const;
  static RunConfig from_manifest_json(const std::string& json_text);
};

// TOML-subset reader: [section] headers, key = value with strings,
// numbers, booleans and flat arrays, # comments.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_string(const std::string& content);

// "section.key=value" override; flags win over the file.
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace modlm::cli

#endif  // MODLM_RUNCONFIG_HPP
