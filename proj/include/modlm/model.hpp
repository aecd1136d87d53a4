// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_MODEL_HPP
#define MODLM_MODEL_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "modlm/error.hpp"
#include "modlm/tensor.hpp"
#include "modlm/vocab.hpp"

namespace modlm::model {

struct ModelConfig {
  std::int64_t vocab_size = 250002;       // V
  std::int64_t hidden = 768;              // H
  std::int64_t layers = 12;               // L
  std::int64_t heads = 12;                // A
  std::int64_t ffn_dim = 3072;            // F
  std::int64_t adapter_bottleneck = 384;  // B
  std::int64_t max_positions = 514;       // P
  std::vector<std::string> languages;
  bool include_pooler = true;
  int padding_offset = 2;
  double layer_norm_eps = 1e-5;

  void validate() const;
  static ModelConfig reference();  // the 12-layer base configuration
};

enum class Partition { SharedBody, Embeddings, Adapter, TaskHead };

const char* partition_name(Partition p);

struct ParamInfo {
  Partition partition = Partition::SharedBody;
  std::string lang;  // set for adapter tensors
};

// Named-tensor container for all weights. Iteration order is the tensor
// name order, which keeps every traversal deterministic.
struct ParamStore {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, ParamInfo> info;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const {
    return tensors.find(name) != tensors.end();
  }
  void add(const std::string& name, Tensor t, Partition p,
           const std::string& lang = "");
  std::int64_t total_elements() const;
};

struct ParamCount {
  std::int64_t total = 0;          // headline count (MLM head excluded,
                                   // tied embeddings convention)
  std::int64_t with_mlm_head = 0;  // every tensor in the built store
  std::int64_t embeddings = 0;
  std::int64_t shared_body = 0;
  std::int64_t per_adapter = 0;   // one language, all layers
  std::int64_t adapters = 0;      // all languages
  std::int64_t mlm_head = 0;      // transform + its layer norm + vocab bias
  std::map<std::string, std::int64_t> per_partition;
};

// Closed-form parameter accounting; matches build_model element counts
// exactly. `total` follows the tied-embeddings reporting convention (the
// MLM head is excluded and listed separately).
ParamCount count_params(const ModelConfig& config);

// Allocates and initializes all tensors: normal(0, 0.02) weights, zero
// biases, ones/zeros layer norms. Each tensor draws from its own stream
// derived from (seed, tensor name), so stores are reproducible and
// insensitive to traversal order.
ParamStore build_model(const ModelConfig& config, std::uint64_t init_seed);

enum class FreezeMode { AdaptPretrainV1, AdaptPretrainV2, Finetune };

FreezeMode parse_freeze_mode(const std::string& name);
const char* freeze_mode_name(FreezeMode mode);

// Trainable-tensor set per mode: v1 = adapters only; v2 = adapters +
// embeddings + MLM head; finetune = shared body + embeddings + task heads,
// adapters frozen.
std::set<std::string> apply_freeze_policy(const ParamStore& params,
                                          FreezeMode mode);
std::int64_t trainable_param_count(const ModelConfig& config, FreezeMode mode);

struct AdapterInit {
  enum class Kind { Copy, Average, Random } kind = Kind::Random;
  std::vector<std::string> sources;  // copy: 1 entry; average: >=1
  std::uint64_t seed = 0;            // random
};

// Initializes target_lang's adapter tensors in place.
void adapter_init(ParamStore& params, const std::string& target_lang,
                  const AdapterInit& strategy);

// New embedding matrix for new_vocab: rows whose piece surface occurs in
// old_vocab are copied from old_embeddings; special-token rows are copied
// by name where names match; all remaining rows are drawn normal(0, 0.02)
// from the seed.
Tensor transfer_embeddings(const tok::Vocabulary& old_vocab,
                           const Tensor& old_embeddings,
                           const tok::Vocabulary& new_vocab,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// forward / backward

// Activations of one sequence, kept for backward and for the evaluation
// paths that read all hidden layers.
struct LayerCache {
  Tensor x_in;                    // T x H input to the layer
  Tensor q, k, v;                 // T x H projections
  Tensor probs;                   // A x T x T attention weights
  Tensor ctx;                     // T x H context
  Tensor attn_out;                // T x H after output projection
  Tensor ln1_xhat, ln1_out;       // post-attention layer norm
  std::vector<double> ln1_inv_std;
  Tensor ffn_pre, ffn_act;        // T x F
  Tensor ffn_out;                 // T x H
  Tensor ln2_xhat, ln2_out;       // post-FFN layer norm
  std::vector<double> ln2_inv_std;
  Tensor down_pre, down_act;      // T x B adapter bottleneck
  Tensor adapter_out;             // T x H
  Tensor layer_out;               // T x H
};

struct ForwardCache {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;  // 1 = real token
  std::string lang;
  Tensor emb_sum;                  // T x H before the embedding layer norm
  Tensor emb_xhat, h0;
  std::vector<double> emb_inv_std;
  std::vector<LayerCache> layers;
  const Tensor& final_hidden() const {
    return layers.empty() ? h0 : layers.back().layer_out;
  }
  // embeddings-layer output plus all L layer outputs
  std::vector<const Tensor*> all_hidden() const;
};

// Encoder pass over one sequence with the active language's adapter.
// Throws RoutingError for an unconfigured language.
void forward(const ParamStore& params, const std::vector<std::int32_t>& ids,
             const std::vector<std::uint8_t>& attention_mask,
             const std::string& active_language, ForwardCache* cache);

// Gradient accumulator keyed by tensor name; only names present receive
// gradients (missing names are allocated on first touch).
struct GradStore {
  std::map<std::string, Tensor> grads;
  Tensor& accum(const std::string& name,
                const std::vector<std::int64_t>& shape);
  void clear();
};

// Backward through the encoder given d(final hidden); accumulates into
// grads and returns nothing. Must be called with the cache produced by
// forward().
void encoder_backward(const ParamStore& params, const ForwardCache& cache,
                      const Tensor& d_final, GradStore* grads);

// MLM head logits at the given positions (count x V).
Tensor mlm_logits(const ParamStore& params, const Tensor& final_hidden,
                  const std::vector<std::int32_t>& positions,
                  struct MlmHeadCache* head_cache);

struct MlmHeadCache {
  std::vector<std::int32_t> positions;
  Tensor h_sel;       // count x H selected hidden states
  Tensor pre, act;    // count x H transform pre/post activation
  Tensor xhat, t;     // count x H layer-normed transform output
  std::vector<double> inv_std;
};

// Cross-entropy over labeled positions. labels[t] < 0 means ignored.
// Returns (loss_sum, label_count); when grads != nullptr also runs the
// full backward (head + encoder + embeddings).
std::pair<double, std::int64_t> mlm_loss(
    const ParamStore& params, const std::vector<std::int32_t>& input_ids,
    const std::vector<std::uint8_t>& attention_mask,
    const std::vector<std::int32_t>& labels, const std::string& lang,
    GradStore* grads);

// ---------------------------------------------------------------------------
// checkpoint io: JSON manifest + single little-endian raw blob

void save_checkpoint(const std::string& dir, const ParamStore& params);
ParamStore load_checkpoint(const std::string& dir);

}  // namespace modlm::model

#endif  // MODLM_MODEL_HPP
