// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward and backward passes of the modular encoder. One sequence at a
// time; parallelism lives inside the kernels so gradient accumulation
// across sequences stays in a fixed order.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "modlm/kernels.hpp"
#include "modlm/model.hpp"

namespace modlm::model {

namespace {

constexpr double kMaskPenalty = -1e30;

std::string layer_prefix(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer.%02lld.", static_cast<long long>(i));
  return buf;
}

}  // namespace

std::vector<const Tensor*> ForwardCache::all_hidden() const {
  std::vector<const Tensor*> out;
  out.push_back(&h0);
  for (const auto& l : layers) out.push_back(&l.layer_out);
  return out;
}

Tensor& GradStore::accum(const std::string& name,
                         const std::vector<std::int64_t>& shape) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, Tensor(shape)).first;
  return it->second;
}

void GradStore::clear() { grads.clear(); }

void forward(const ParamStore& params, const std::vector<std::int32_t>& ids,
             const std::vector<std::uint8_t>& attention_mask,
             const std::string& active_language, ForwardCache* cache) {
  const ModelConfig& cfg = params.config;
  if (std::find(cfg.languages.begin(), cfg.languages.end(), active_language) ==
      cfg.languages.end())
    throw RoutingError("language not configured: " + active_language);
  const auto T = static_cast<std::int64_t>(ids.size());
  if (T == 0) throw DegenerateInput("empty sequence");
  if (attention_mask.size() != ids.size())
    throw DataError("attention mask length mismatch");
  if (T + cfg.padding_offset > cfg.max_positions)
    throw DataError("sequence longer than max_positions allows");
  const std::int64_t H = cfg.hidden;
  const std::int64_t A = cfg.heads;
  const std::int64_t D = H / A;
  const std::int64_t F = cfg.ffn_dim;
  const std::int64_t B = cfg.adapter_bottleneck;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

  cache->ids = ids;
  cache->mask = attention_mask;
  cache->lang = active_language;

  // embeddings
  const Tensor& word = params.at("emb.word");
  const Tensor& pos = params.at("emb.pos");
  const Tensor& ttype = params.at("emb.token_type");
  cache->emb_sum = Tensor({T, H});
  for (std::int64_t t = 0; t < T; ++t) {
    const std::int32_t id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= cfg.vocab_size)
      throw DataError("token id out of range: " + std::to_string(id));
    const double* wrow = word.ptr() + static_cast<std::int64_t>(id) * H;
    const double* prow = pos.ptr() + (cfg.padding_offset + t) * H;
    double* out = cache->emb_sum.ptr() + t * H;
    for (std::int64_t c = 0; c < H; ++c)
      out[c] = wrow[c] + prow[c] + ttype.ptr()[c];
  }
  cache->emb_xhat = Tensor({T, H});
  cache->h0 = Tensor({T, H});
  cache->emb_inv_std.assign(static_cast<std::size_t>(T), 0.0);
  kern::layernorm_forward(cache->emb_sum.ptr(), params.at("emb.ln.g").ptr(),
                          params.at("emb.ln.b").ptr(), cache->h0.ptr(),
                          cache->emb_xhat.ptr(), cache->emb_inv_std.data(), T,
                          H, cfg.layer_norm_eps);

  cache->layers.assign(static_cast<std::size_t>(cfg.layers), LayerCache{});
  const Tensor* h = &cache->h0;
  for (std::int64_t l = 0; l < cfg.layers; ++l) {
    LayerCache& lc = cache->layers[static_cast<std::size_t>(l)];
    const std::string pre = layer_prefix(l);
    lc.x_in = *h;

    lc.q = Tensor({T, H});
    lc.k = Tensor({T, H});
    lc.v = Tensor({T, H});
    kern::linear_forward(h->ptr(), params.at(pre + "attn.q.w").ptr(),
                         params.at(pre + "attn.q.b").ptr(), lc.q.ptr(), T, H,
                         H);
    kern::linear_forward(h->ptr(), params.at(pre + "attn.k.w").ptr(),
                         params.at(pre + "attn.k.b").ptr(), lc.k.ptr(), T, H,
                         H);
    kern::linear_forward(h->ptr(), params.at(pre + "attn.v.w").ptr(),
                         params.at(pre + "attn.v.b").ptr(), lc.v.ptr(), T, H,
                         H);

    Tensor scores({A, T, T});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t i = 0; i < T; ++i) {
        const double* qi = lc.q.ptr() + i * H + a * D;
        double* srow = scores.ptr() + (a * T + i) * T;
        for (std::int64_t j = 0; j < T; ++j) {
          const double* kj = lc.k.ptr() + j * H + a * D;
          double acc = 0.0;
          for (std::int64_t c = 0; c < D; ++c) acc += qi[c] * kj[c];
          srow[j] = acc * inv_sqrt_d +
                    (attention_mask[static_cast<std::size_t>(j)] ? 0.0
                                                                 : kMaskPenalty);
        }
      }
    }
    lc.probs = Tensor({A, T, T});
    kern::softmax_rows(scores.ptr(), lc.probs.ptr(), A * T, T);

    lc.ctx = Tensor({T, H});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t i = 0; i < T; ++i) {
        const double* prow = lc.probs.ptr() + (a * T + i) * T;
        double* crow = lc.ctx.ptr() + i * H + a * D;
        for (std::int64_t c = 0; c < D; ++c) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < T; ++j)
            acc += prow[j] * lc.v.ptr()[j * H + a * D + c];
          crow[c] = acc;
        }
      }
    }

    lc.attn_out = Tensor({T, H});
    kern::linear_forward(lc.ctx.ptr(), params.at(pre + "attn.o.w").ptr(),
                         params.at(pre + "attn.o.b").ptr(), lc.attn_out.ptr(),
                         T, H, H);

    Tensor res1({T, H});
    for (std::int64_t i = 0; i < T * H; ++i)
      res1.ptr()[i] = lc.x_in.ptr()[i] + lc.attn_out.ptr()[i];
    lc.ln1_xhat = Tensor({T, H});
    lc.ln1_out = Tensor({T, H});
    lc.ln1_inv_std.assign(static_cast<std::size_t>(T), 0.0);
    kern::layernorm_forward(res1.ptr(), params.at(pre + "attn.ln.g").ptr(),
                            params.at(pre + "attn.ln.b").ptr(),
                            lc.ln1_out.ptr(), lc.ln1_xhat.ptr(),
                            lc.ln1_inv_std.data(), T, H, cfg.layer_norm_eps);

    lc.ffn_pre = Tensor({T, F});
    kern::linear_forward(lc.ln1_out.ptr(), params.at(pre + "ffn.w1.w").ptr(),
                         params.at(pre + "ffn.w1.b").ptr(), lc.ffn_pre.ptr(),
                         T, H, F);
    lc.ffn_act = Tensor({T, F});
    kern::gelu_forward(lc.ffn_pre.ptr(), lc.ffn_act.ptr(), T * F);
    lc.ffn_out = Tensor({T, H});
    kern::linear_forward(lc.ffn_act.ptr(), params.at(pre + "ffn.w2.w").ptr(),
                         params.at(pre + "ffn.w2.b").ptr(), lc.ffn_out.ptr(),
                         T, F, H);

    Tensor res2({T, H});
    for (std::int64_t i = 0; i < T * H; ++i)
      res2.ptr()[i] = lc.ln1_out.ptr()[i] + lc.ffn_out.ptr()[i];
    lc.ln2_xhat = Tensor({T, H});
    lc.ln2_out = Tensor({T, H});
    lc.ln2_inv_std.assign(static_cast<std::size_t>(T), 0.0);
    kern::layernorm_forward(res2.ptr(), params.at(pre + "ffn.ln.g").ptr(),
                            params.at(pre + "ffn.ln.b").ptr(),
                            lc.ln2_out.ptr(), lc.ln2_xhat.ptr(),
                            lc.ln2_inv_std.data(), T, H, cfg.layer_norm_eps);

    // language adapter: bottleneck with residual, no extra layer norm
    const std::string apre = pre + "adapter." + active_language + ".";
    lc.down_pre = Tensor({T, B});
    kern::linear_forward(lc.ln2_out.ptr(), params.at(apre + "down.w").ptr(),
                         params.at(apre + "down.b").ptr(), lc.down_pre.ptr(),
                         T, H, B);
    lc.down_act = Tensor({T, B});
    kern::gelu_forward(lc.down_pre.ptr(), lc.down_act.ptr(), T * B);
    lc.adapter_out = Tensor({T, H});
    kern::linear_forward(lc.down_act.ptr(), params.at(apre + "up.w").ptr(),
                         params.at(apre + "up.b").ptr(), lc.adapter_out.ptr(),
                         T, B, H);

    lc.layer_out = Tensor({T, H});
    for (std::int64_t i = 0; i < T * H; ++i)
      lc.layer_out.ptr()[i] = lc.ln2_out.ptr()[i] + lc.adapter_out.ptr()[i];
    h = &lc.layer_out;
  }
}

void encoder_backward(const ParamStore& params, const ForwardCache& cache,
                      const Tensor& d_final, GradStore* grads) {
  const ModelConfig& cfg = params.config;
  const auto T = static_cast<std::int64_t>(cache.ids.size());
  const std::int64_t H = cfg.hidden;
  const std::int64_t A = cfg.heads;
  const std::int64_t D = H / A;
  const std::int64_t F = cfg.ffn_dim;
  const std::int64_t B = cfg.adapter_bottleneck;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

  Tensor d_out = d_final;  // gradient w.r.t. the current layer output
  for (std::int64_t l = cfg.layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    const std::string pre = layer_prefix(l);
    const std::string apre = pre + "adapter." + cache.lang + ".";

    // adapter: layer_out = ln2_out + up(gelu(down(ln2_out)))
    Tensor d_down_act({T, B});
    kern::linear_backward_input(d_out.ptr(), params.at(apre + "up.w").ptr(),
                                d_down_act.ptr(), T, B, H);
    kern::linear_backward_params(
        d_out.ptr(), lc.down_act.ptr(),
        grads->accum(apre + "up.w", {H, B}).ptr(),
        grads->accum(apre + "up.b", {H}).ptr(), T, B, H);
    Tensor d_down_pre({T, B});
    kern::gelu_backward(lc.down_pre.ptr(), d_down_act.ptr(), d_down_pre.ptr(),
                        T * B);
    Tensor d_ln2_out = d_out;  // residual branch
    {
      Tensor tmp({T, H});
      kern::linear_backward_input(d_down_pre.ptr(),
                                  params.at(apre + "down.w").ptr(), tmp.ptr(),
                                  T, H, B);
      for (std::int64_t i = 0; i < T * H; ++i)
        d_ln2_out.ptr()[i] += tmp.ptr()[i];
      kern::linear_backward_params(
          d_down_pre.ptr(), lc.ln2_out.ptr(),
          grads->accum(apre + "down.w", {B, H}).ptr(),
          grads->accum(apre + "down.b", {B}).ptr(), T, H, B);
    }

    // ffn layer norm
    Tensor d_res2({T, H});
    kern::layernorm_backward(d_ln2_out.ptr(), params.at(pre + "ffn.ln.g").ptr(),
                             lc.ln2_xhat.ptr(), lc.ln2_inv_std.data(),
                             d_res2.ptr(),
                             grads->accum(pre + "ffn.ln.g", {H}).ptr(),
                             grads->accum(pre + "ffn.ln.b", {H}).ptr(), T, H);

    // ffn: res2 = ln1_out + w2(gelu(w1 ln1_out))
    Tensor d_ffn_act({T, F});
    kern::linear_backward_input(d_res2.ptr(), params.at(pre + "ffn.w2.w").ptr(),
                                d_ffn_act.ptr(), T, F, H);
    kern::linear_backward_params(d_res2.ptr(), lc.ffn_act.ptr(),
                                 grads->accum(pre + "ffn.w2.w", {H, F}).ptr(),
                                 grads->accum(pre + "ffn.w2.b", {H}).ptr(), T,
                                 F, H);
    Tensor d_ffn_pre({T, F});
    kern::gelu_backward(lc.ffn_pre.ptr(), d_ffn_act.ptr(), d_ffn_pre.ptr(),
                        T * F);
    Tensor d_ln1_out = d_res2;  // residual branch
    {
      Tensor tmp({T, H});
      kern::linear_backward_input(d_ffn_pre.ptr(),
                                  params.at(pre + "ffn.w1.w").ptr(), tmp.ptr(),
                                  T, H, F);
      for (std::int64_t i = 0; i < T * H; ++i)
        d_ln1_out.ptr()[i] += tmp.ptr()[i];
      kern::linear_backward_params(
          d_ffn_pre.ptr(), lc.ln1_out.ptr(),
          grads->accum(pre + "ffn.w1.w", {F, H}).ptr(),
          grads->accum(pre + "ffn.w1.b", {F}).ptr(), T, H, F);
    }

    // attention layer norm
    Tensor d_res1({T, H});
    kern::layernorm_backward(
        d_ln1_out.ptr(), params.at(pre + "attn.ln.g").ptr(),
        lc.ln1_xhat.ptr(), lc.ln1_inv_std.data(), d_res1.ptr(),
        grads->accum(pre + "attn.ln.g", {H}).ptr(),
        grads->accum(pre + "attn.ln.b", {H}).ptr(), T, H);

    // attention: res1 = x + o(ctx)
    Tensor d_ctx({T, H});
    kern::linear_backward_input(d_res1.ptr(), params.at(pre + "attn.o.w").ptr(),
                                d_ctx.ptr(), T, H, H);
    kern::linear_backward_params(d_res1.ptr(), lc.ctx.ptr(),
                                 grads->accum(pre + "attn.o.w", {H, H}).ptr(),
                                 grads->accum(pre + "attn.o.b", {H}).ptr(), T,
                                 H, H);

    Tensor d_probs({A, T, T});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t i = 0; i < T; ++i) {
        const double* dci = d_ctx.ptr() + i * H + a * D;
        double* drow = d_probs.ptr() + (a * T + i) * T;
        for (std::int64_t j = 0; j < T; ++j) {
          const double* vj = lc.v.ptr() + j * H + a * D;
          double acc = 0.0;
          for (std::int64_t c = 0; c < D; ++c) acc += dci[c] * vj[c];
          drow[j] = acc;
        }
      }
    }
    Tensor d_v({T, H});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t j = 0; j < T; ++j) {
        double* dvj = d_v.ptr() + j * H + a * D;
        for (std::int64_t c = 0; c < D; ++c) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < T; ++i)
            acc += lc.probs.ptr()[(a * T + i) * T + j] *
                   d_ctx.ptr()[i * H + a * D + c];
          dvj[c] = acc;
        }
      }
    }

    // softmax backward (rows of probs)
    Tensor d_scores({A, T, T});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t i = 0; i < T; ++i) {
        const double* prow = lc.probs.ptr() + (a * T + i) * T;
        const double* dprow = d_probs.ptr() + (a * T + i) * T;
        double dot = 0.0;
        for (std::int64_t j = 0; j < T; ++j) dot += prow[j] * dprow[j];
        double* dsrow = d_scores.ptr() + (a * T + i) * T;
        for (std::int64_t j = 0; j < T; ++j)
          dsrow[j] = prow[j] * (dprow[j] - dot);
      }
    }

    Tensor d_q({T, H});
    Tensor d_k({T, H});
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t i = 0; i < T; ++i) {
        double* dqi = d_q.ptr() + i * H + a * D;
        const double* dsrow = d_scores.ptr() + (a * T + i) * T;
        for (std::int64_t c = 0; c < D; ++c) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < T; ++j)
            acc += dsrow[j] * lc.k.ptr()[j * H + a * D + c];
          dqi[c] = acc * inv_sqrt_d;
        }
      }
    }
#pragma omp parallel for collapse(2) if (A * T > 8)
    for (std::int64_t a = 0; a < A; ++a) {
      for (std::int64_t j = 0; j < T; ++j) {
        double* dkj = d_k.ptr() + j * H + a * D;
        for (std::int64_t c = 0; c < D; ++c) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < T; ++i)
            acc += d_scores.ptr()[(a * T + i) * T + j] *
                   lc.q.ptr()[i * H + a * D + c];
          dkj[c] = acc * inv_sqrt_d;
        }
      }
    }

    // project back to the layer input
    Tensor d_x = d_res1;  // residual branch
    {
      Tensor tmp({T, H});
      kern::linear_backward_input(d_q.ptr(), params.at(pre + "attn.q.w").ptr(),
                                  tmp.ptr(), T, H, H);
      for (std::int64_t i = 0; i < T * H; ++i) d_x.ptr()[i] += tmp.ptr()[i];
      kern::linear_backward_input(d_k.ptr(), params.at(pre + "attn.k.w").ptr(),
                                  tmp.ptr(), T, H, H);
      for (std::int64_t i = 0; i < T * H; ++i) d_x.ptr()[i] += tmp.ptr()[i];
      kern::linear_backward_input(d_v.ptr(), params.at(pre + "attn.v.w").ptr(),
                                  tmp.ptr(), T, H, H);
      for (std::int64_t i = 0; i < T * H; ++i) d_x.ptr()[i] += tmp.ptr()[i];
      kern::linear_backward_params(d_q.ptr(), lc.x_in.ptr(),
                                   grads->accum(pre + "attn.q.w", {H, H}).ptr(),
                                   grads->accum(pre + "attn.q.b", {H}).ptr(),
                                   T, H, H);
      kern::linear_backward_params(d_k.ptr(), lc.x_in.ptr(),
                                   grads->accum(pre + "attn.k.w", {H, H}).ptr(),
                                   grads->accum(pre + "attn.k.b", {H}).ptr(),
                                   T, H, H);
      kern::linear_backward_params(d_v.ptr(), lc.x_in.ptr(),
                                   grads->accum(pre + "attn.v.w", {H, H}).ptr(),
                                   grads->accum(pre + "attn.v.b", {H}).ptr(),
                                   T, H, H);
    }
    d_out = std::move(d_x);
  }

  // embeddings
  Tensor d_emb_sum({T, H});
  kern::layernorm_backward(d_out.ptr(), params.at("emb.ln.g").ptr(),
                           cache.emb_xhat.ptr(), cache.emb_inv_std.data(),
                           d_emb_sum.ptr(),
                           grads->accum("emb.ln.g", {H}).ptr(),
                           grads->accum("emb.ln.b", {H}).ptr(), T, H);
  Tensor& d_word = grads->accum("emb.word", {cfg.vocab_size, H});
  Tensor& d_pos = grads->accum("emb.pos", {cfg.max_positions, H});
  Tensor& d_tt = grads->accum("emb.token_type", {1, H});
  for (std::int64_t t = 0; t < T; ++t) {
    const std::int64_t id = cache.ids[static_cast<std::size_t>(t)];
    const double* src = d_emb_sum.ptr() + t * H;
    double* wrow = d_word.ptr() + id * H;
    double* prow = d_pos.ptr() + (cfg.padding_offset + t) * H;
    for (std::int64_t c = 0; c < H; ++c) {
      wrow[c] += src[c];
      prow[c] += src[c];
      d_tt.ptr()[c] += src[c];
    }
  }
}

Tensor mlm_logits(const ParamStore& params, const Tensor& final_hidden,
                  const std::vector<std::int32_t>& positions,
                  MlmHeadCache* head_cache) {
  const ModelConfig& cfg = params.config;
  const std::int64_t H = cfg.hidden;
  const std::int64_t V = cfg.vocab_size;
  const auto N = static_cast<std::int64_t>(positions.size());
  head_cache->positions = positions;
  head_cache->h_sel = Tensor({N, H});
  for (std::int64_t i = 0; i < N; ++i) {
    const double* src =
        final_hidden.ptr() +
        static_cast<std::int64_t>(positions[static_cast<std::size_t>(i)]) * H;
    std::copy(src, src + H, head_cache->h_sel.ptr() + i * H);
  }
  head_cache->pre = Tensor({N, H});
  kern::linear_forward(head_cache->h_sel.ptr(),
                       params.at("mlm.transform.w").ptr(),
                       params.at("mlm.transform.b").ptr(),
                       head_cache->pre.ptr(), N, H, H);
  head_cache->act = Tensor({N, H});
  kern::gelu_forward(head_cache->pre.ptr(), head_cache->act.ptr(), N * H);
  head_cache->xhat = Tensor({N, H});
  head_cache->t = Tensor({N, H});
  head_cache->inv_std.assign(static_cast<std::size_t>(N), 0.0);
  kern::layernorm_forward(head_cache->act.ptr(), params.at("mlm.ln.g").ptr(),
                          params.at("mlm.ln.b").ptr(), head_cache->t.ptr(),
                          head_cache->xhat.ptr(), head_cache->inv_std.data(),
                          N, H, cfg.layer_norm_eps);
  // projection tied to the word embeddings
  Tensor logits({N, V});
  kern::linear_forward(head_cache->t.ptr(), params.at("emb.word").ptr(),
                       params.at("mlm.bias").ptr(), logits.ptr(), N, H, V);
  return logits;
}

std::pair<double, std::int64_t> mlm_loss(
    const ParamStore& params, const std::vector<std::int32_t>& input_ids,
    const std::vector<std::uint8_t>& attention_mask,
    const std::vector<std::int32_t>& labels, const std::string& lang,
    GradStore* grads) {
  const ModelConfig& cfg = params.config;
  const std::int64_t H = cfg.hidden;
  const std::int64_t V = cfg.vocab_size;
  if (labels.size() != input_ids.size())
    throw DataError("labels length mismatch");

  ForwardCache cache;
  forward(params, input_ids, attention_mask, lang, &cache);

  std::vector<std::int32_t> positions;
  for (std::size_t t = 0; t < labels.size(); ++t)
    if (labels[t] >= 0) positions.push_back(static_cast<std::int32_t>(t));
  if (positions.empty()) return {0.0, 0};

  MlmHeadCache hc;
  const Tensor logits =
      mlm_logits(params, cache.final_hidden(), positions, &hc);
  const auto N = static_cast<std::int64_t>(positions.size());

  Tensor probs({N, V});
  kern::softmax_rows(logits.ptr(), probs.ptr(), N, V);
  double loss_sum = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    const std::int32_t y =
        labels[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])];
    if (y >= V) throw DataError("label out of range");
    loss_sum += -std::log(std::max(probs.ptr()[i * V + y], 1e-300));
  }

  if (grads) {
    // d loss_sum / d logits = softmax - onehot
    Tensor dlogits = probs;
    for (std::int64_t i = 0; i < N; ++i) {
      const std::int32_t y = labels[static_cast<std::size_t>(
          positions[static_cast<std::size_t>(i)])];
      dlogits.ptr()[i * V + y] -= 1.0;
    }
    // tied projection: gradient flows to emb.word and mlm.bias
    Tensor dt({N, H});
    kern::linear_backward_input(dlogits.ptr(), params.at("emb.word").ptr(),
                                dt.ptr(), N, H, V);
    kern::linear_backward_params(dlogits.ptr(), hc.t.ptr(),
                                 grads->accum("emb.word", {V, H}).ptr(),
                                 grads->accum("mlm.bias", {V}).ptr(), N, H, V);
    Tensor dact({N, H});
    kern::layernorm_backward(dt.ptr(), params.at("mlm.ln.g").ptr(),
                             hc.xhat.ptr(), hc.inv_std.data(), dact.ptr(),
                             grads->accum("mlm.ln.g", {H}).ptr(),
                             grads->accum("mlm.ln.b", {H}).ptr(), N, H);
    Tensor dpre({N, H});
    kern::gelu_backward(hc.pre.ptr(), dact.ptr(), dpre.ptr(), N * H);
    Tensor dh_sel({N, H});
    kern::linear_backward_input(dpre.ptr(), params.at("mlm.transform.w").ptr(),
                                dh_sel.ptr(), N, H, H);
    kern::linear_backward_params(
        dpre.ptr(), hc.h_sel.ptr(),
        grads->accum("mlm.transform.w", {H, H}).ptr(),
        grads->accum("mlm.transform.b", {H}).ptr(), N, H, H);

    const auto T = static_cast<std::int64_t>(input_ids.size());
    Tensor d_final({T, H});
    for (std::int64_t i = 0; i < N; ++i) {
      double* dst =
          d_final.ptr() +
          static_cast<std::int64_t>(positions[static_cast<std::size_t>(i)]) *
              H;
      const double* src = dh_sel.ptr() + i * H;
      for (std::int64_t c = 0; c < H; ++c) dst[c] += src[c];
    }
    encoder_backward(params, cache, d_final, grads);
  }
  return {loss_sum, N};
}

}  // namespace modlm::model
