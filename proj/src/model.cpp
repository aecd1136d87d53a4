// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/model.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace modlm::model {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string layer_prefix(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer.%02lld.", static_cast<long long>(i));
  return buf;
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden <= 0 || layers <= 0 || heads <= 0 || ffn_dim <= 0 ||
      max_positions <= 0)
    throw ConfigError("model dimensions must be positive");
  if (hidden % heads != 0)
    throw ConfigError("hidden size must be divisible by the head count");
  if (adapter_bottleneck < 1)
    throw ConfigError("adapter bottleneck must be >= 1");
  if (vocab_size < 5)
    throw ConfigError("vocab_size must cover the special tokens");
  if (padding_offset < 0 || padding_offset >= max_positions)
    throw ConfigError("padding_offset out of range");
  for (const auto& lang : languages)
    if (lang.empty()) throw ConfigError("empty language tag");
}

ModelConfig ModelConfig::reference() {
  ModelConfig c;
  c.vocab_size = 250002;
  c.hidden = 768;
  c.layers = 12;
  c.heads = 12;
  c.ffn_dim = 3072;
  c.adapter_bottleneck = 384;
  c.max_positions = 514;
  c.include_pooler = true;
  c.padding_offset = 2;
  return c;
}

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::SharedBody: return "shared_body";
    case Partition::Embeddings: return "embeddings";
    case Partition::Adapter: return "adapter";
    case Partition::TaskHead: return "task_head";
  }
  return "shared_body";
}

Tensor& ParamStore::at(const std::string& name) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("no such tensor: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("no such tensor: " + name);
  return it->second;
}

void ParamStore::add(const std::string& name, Tensor t, Partition p,
                     const std::string& lang) {
  if (has(name)) throw ConfigError("duplicate tensor: " + name);
  tensors.emplace(name, std::move(t));
  info.emplace(name, ParamInfo{p, lang});
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

ParamCount count_params(const ModelConfig& config) {
  config.validate();
  const std::int64_t V = config.vocab_size;
  const std::int64_t H = config.hidden;
  const std::int64_t L = config.layers;
  const std::int64_t F = config.ffn_dim;
  const std::int64_t B = config.adapter_bottleneck;
  const std::int64_t P = config.max_positions;

  ParamCount count;
  // word + positional + token-type embeddings + embedding layer norm
  count.embeddings = V * H + P * H + H + 2 * H;
  // per layer: attention QKVO, two layer norms, FFN in/out
  const std::int64_t per_layer =
      4 * (H * H + H) + 2 * H + (H * F + F) + (F * H + H) + 2 * H;
  count.shared_body = L * per_layer;
  if (config.include_pooler) count.shared_body += H * H + H;
  count.per_adapter = L * (H * B + B + B * H + H);
  count.adapters =
      static_cast<std::int64_t>(config.languages.size()) * count.per_adapter;
  // transform + transform layer norm + vocab bias; projection tied to the
  // word embeddings
  count.mlm_head = H * H + H + 2 * H + V;

  count.total = count.embeddings + count.shared_body + count.adapters;
  count.with_mlm_head = count.total + count.mlm_head;

  count.per_partition["embeddings"] = count.embeddings;
  count.per_partition["shared_body"] = count.shared_body;
  for (const auto& lang : config.languages)
    count.per_partition["adapter:" + lang] = count.per_adapter;
  count.per_partition["task_head"] = count.mlm_head;
  return count;
}

namespace {

void init_tensor(Tensor& t, const std::string& name, std::uint64_t seed,
                 bool is_weight, bool is_ln_gain) {
  Rng rng(Rng::mix(seed, fnv1a(name)));
  if (is_ln_gain) {
    t.fill(1.0);
  } else if (is_weight) {
    t.fill_normal(rng, 0.02);
  } else {
    t.fill(0.0);
  }
}

bool name_is_weight(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0;
}

bool name_is_ln_gain(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".ln.g") == 0;
}

}  // namespace

ParamStore build_model(const ModelConfig& config, std::uint64_t init_seed) {
  config.validate();
  const std::int64_t V = config.vocab_size;
  const std::int64_t H = config.hidden;
  const std::int64_t F = config.ffn_dim;
  const std::int64_t B = config.adapter_bottleneck;
  const std::int64_t P = config.max_positions;

  ParamStore store;
  store.config = config;

  auto add = [&](const std::string& name, std::vector<std::int64_t> shape,
                 Partition p, const std::string& lang = "") {
    Tensor t(std::move(shape));
    const bool ln_gain =
        name_is_ln_gain(name) || name == "emb.ln.g" || name == "mlm.ln.g";
    init_tensor(t, name, init_seed, name_is_weight(name) || name == "emb.word" ||
                                        name == "emb.pos" ||
                                        name == "emb.token_type",
                ln_gain);
    store.add(name, std::move(t), p, lang);
  };

  add("emb.word", {V, H}, Partition::Embeddings);
  add("emb.pos", {P, H}, Partition::Embeddings);
  add("emb.token_type", {1, H}, Partition::Embeddings);
  add("emb.ln.g", {H}, Partition::Embeddings);
  add("emb.ln.b", {H}, Partition::Embeddings);

  for (std::int64_t l = 0; l < config.layers; ++l) {
    const std::string pre = layer_prefix(l);
    for (const char* proj : {"q", "k", "v", "o"}) {
      add(pre + "attn." + proj + ".w", {H, H}, Partition::SharedBody);
      add(pre + "attn." + proj + ".b", {H}, Partition::SharedBody);
    }
    add(pre + "attn.ln.g", {H}, Partition::SharedBody);
    add(pre + "attn.ln.b", {H}, Partition::SharedBody);
    add(pre + "ffn.w1.w", {F, H}, Partition::SharedBody);
    add(pre + "ffn.w1.b", {F}, Partition::SharedBody);
    add(pre + "ffn.w2.w", {H, F}, Partition::SharedBody);
    add(pre + "ffn.w2.b", {H}, Partition::SharedBody);
    add(pre + "ffn.ln.g", {H}, Partition::SharedBody);
    add(pre + "ffn.ln.b", {H}, Partition::SharedBody);
    for (const auto& lang : config.languages) {
      const std::string apre = pre + "adapter." + lang + ".";
      add(apre + "down.w", {B, H}, Partition::Adapter, lang);
      add(apre + "down.b", {B}, Partition::Adapter, lang);
      add(apre + "up.w", {H, B}, Partition::Adapter, lang);
      add(apre + "up.b", {H}, Partition::Adapter, lang);
    }
  }

  if (config.include_pooler) {
    add("pooler.w", {H, H}, Partition::SharedBody);
    add("pooler.b", {H}, Partition::SharedBody);
  }

  add("mlm.transform.w", {H, H}, Partition::TaskHead);
  add("mlm.transform.b", {H}, Partition::TaskHead);
  add("mlm.ln.g", {H}, Partition::TaskHead);
  add("mlm.ln.b", {H}, Partition::TaskHead);
  add("mlm.bias", {V}, Partition::TaskHead);

  return store;
}

FreezeMode parse_freeze_mode(const std::string& name) {
  if (name == "adapt_pretrain_v1") return FreezeMode::AdaptPretrainV1;
  if (name == "adapt_pretrain_v2") return FreezeMode::AdaptPretrainV2;
  if (name == "finetune") return FreezeMode::Finetune;
  throw ConfigError("unknown freeze mode: " + name);
}

const char* freeze_mode_name(FreezeMode mode) {
  switch (mode) {
    case FreezeMode::AdaptPretrainV1: return "adapt_pretrain_v1";
    case FreezeMode::AdaptPretrainV2: return "adapt_pretrain_v2";
    case FreezeMode::Finetune: return "finetune";
  }
  return "finetune";
}

std::set<std::string> apply_freeze_policy(const ParamStore& params,
                                          FreezeMode mode) {
  std::set<std::string> trainable;
  for (const auto& [name, pi] : params.info) {
    bool train = false;
    switch (mode) {
      case FreezeMode::AdaptPretrainV1:
        train = pi.partition == Partition::Adapter;
        break;
      case FreezeMode::AdaptPretrainV2:
        train = pi.partition == Partition::Adapter ||
                pi.partition == Partition::Embeddings ||
                (pi.partition == Partition::TaskHead &&
                 name.rfind("mlm.", 0) == 0);
        break;
      case FreezeMode::Finetune:
        train = pi.partition == Partition::SharedBody ||
                pi.partition == Partition::Embeddings ||
                pi.partition == Partition::TaskHead;
        break;
    }
    if (train) trainable.insert(name);
  }
  return trainable;
}

std::int64_t trainable_param_count(const ModelConfig& config,
                                   FreezeMode mode) {
  const ParamCount count = count_params(config);
  switch (mode) {
    case FreezeMode::AdaptPretrainV1:
      return count.adapters;
    case FreezeMode::AdaptPretrainV2:
      return count.adapters + count.embeddings + count.mlm_head;
    case FreezeMode::Finetune:
      return count.shared_body + count.embeddings + count.mlm_head;
  }
  return 0;
}

namespace {

std::vector<std::string> adapter_tensor_names(const ParamStore& params,
                                              const std::string& lang) {
  std::vector<std::string> names;
  for (const auto& [name, pi] : params.info)
    if (pi.partition == Partition::Adapter && pi.lang == lang)
      names.push_back(name);
  if (names.empty())
    throw RoutingError("no adapter for language: " + lang);
  return names;
}

// "layer.03.adapter.de_ch.down.w" -> with lang swapped
std::string adapter_name_for(const std::string& name,
                             const std::string& from_lang,
                             const std::string& to_lang) {
  const std::string needle = ".adapter." + from_lang + ".";
  const auto pos = name.find(needle);
  if (pos == std::string::npos)
    throw RoutingError("not an adapter tensor: " + name);
  std::string out = name;
  out.replace(pos, needle.size(), ".adapter." + to_lang + ".");
  return out;
}

}  // namespace

void adapter_init(ParamStore& params, const std::string& target_lang,
                  const AdapterInit& strategy) {
  const auto targets = adapter_tensor_names(params, target_lang);
  switch (strategy.kind) {
    case AdapterInit::Kind::Copy: {
      if (strategy.sources.size() != 1)
        throw ConfigError("copy strategy needs exactly one source");
      for (const auto& tname : targets) {
        const std::string sname =
            adapter_name_for(tname, target_lang, strategy.sources[0]);
        if (!params.has(sname))
          throw RoutingError("missing source adapter tensor: " + sname);
        params.at(tname).data = params.at(sname).data;
      }
      break;
    }
    case AdapterInit::Kind::Average: {
      if (strategy.sources.empty())
        throw ConfigError("average strategy needs at least one source");
      for (const auto& tname : targets) {
        Tensor& target = params.at(tname);
        std::vector<double> acc(target.data.size(), 0.0);
        for (const auto& src : strategy.sources) {
          const std::string sname = adapter_name_for(tname, target_lang, src);
          if (!params.has(sname))
            throw RoutingError("missing source adapter tensor: " + sname);
          const Tensor& s = params.at(sname);
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s.data[i];
        }
        const double inv = 1.0 / static_cast<double>(strategy.sources.size());
        for (std::size_t i = 0; i < acc.size(); ++i)
          target.data[i] = acc[i] * inv;
      }
      break;
    }
    case AdapterInit::Kind::Random: {
      for (const auto& tname : targets) {
        Tensor& t = params.at(tname);
        init_tensor(t, tname, strategy.seed, name_is_weight(tname), false);
      }
      break;
    }
  }
}

Tensor transfer_embeddings(const tok::Vocabulary& old_vocab,
                           const Tensor& old_embeddings,
                           const tok::Vocabulary& new_vocab,
                           std::uint64_t seed) {
  if (old_embeddings.shape.size() != 2 ||
      old_embeddings.dim(0) != old_vocab.size())
    throw ConfigError("old embedding matrix does not match old vocabulary");
  const std::int64_t H = old_embeddings.dim(1);
  Tensor out({new_vocab.size(), H});
  Rng base(seed);
  for (std::int32_t id = 0; id < new_vocab.size(); ++id) {
    std::int32_t old_id = -1;
    if (new_vocab.is_special(id)) {
      if (auto o = old_vocab.find_special(new_vocab.special_name(id)))
        old_id = *o;
    } else {
      if (auto o = old_vocab.find_piece(new_vocab.piece(id).surface))
        old_id = *o;
    }
    double* row = out.ptr() + static_cast<std::int64_t>(id) * H;
    if (old_id >= 0) {
      const double* src =
          old_embeddings.ptr() + static_cast<std::int64_t>(old_id) * H;
      std::copy(src, src + H, row);
    } else {
      Rng rng = base.fork(static_cast<std::uint64_t>(id));
      for (std::int64_t c = 0; c < H; ++c) row[c] = rng.normal() * 0.02;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint io

void save_checkpoint(const std::string& dir, const ParamStore& params) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  nlohmann::ordered_json cfg;
  cfg["vocab_size"] = params.config.vocab_size;
  cfg["hidden"] = params.config.hidden;
  cfg["layers"] = params.config.layers;
  cfg["heads"] = params.config.heads;
  cfg["ffn_dim"] = params.config.ffn_dim;
  cfg["adapter_bottleneck"] = params.config.adapter_bottleneck;
  cfg["max_positions"] = params.config.max_positions;
  cfg["languages"] = params.config.languages;
  cfg["include_pooler"] = params.config.include_pooler;
  cfg["padding_offset"] = params.config.padding_offset;
  cfg["layer_norm_eps"] = params.config.layer_norm_eps;
  manifest["config"] = cfg;

  auto tensors = nlohmann::ordered_json::array();
  std::int64_t offset = 0;
  for (const auto& [name, t] : params.tensors) {
    const auto& pi = params.info.at(name);
    nlohmann::ordered_json rec;
    rec["name"] = name;
    rec["partition"] = partition_name(pi.partition);
    if (!pi.lang.empty()) rec["lang"] = pi.lang;
    rec["dtype"] = "f64";
    rec["shape"] = t.shape;
    rec["offset"] = offset;
    offset += t.numel() * 8;
    tensors.push_back(std::move(rec));
  }
  manifest["tensors"] = std::move(tensors);
  manifest["blob_bytes"] = offset;

  {
    std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!mf) throw IoError("cannot write checkpoint manifest in " + dir);
    mf << manifest.dump(2) << "\n";
  }
  {
    std::ofstream bf(fs::path(dir) / "params.bin", std::ios::binary);
    if (!bf) throw IoError("cannot write checkpoint blob in " + dir);
    for (const auto& [name, t] : params.tensors) {
      bf.write(reinterpret_cast<const char*>(t.ptr()),
               static_cast<std::streamsize>(t.data.size() * 8));
    }
  }
}

ParamStore load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot open checkpoint manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint manifest: ") + e.what());
  }

  ParamStore store;
  const auto& cfg = manifest.at("config");
  store.config.vocab_size = cfg.at("vocab_size").get<std::int64_t>();
  store.config.hidden = cfg.at("hidden").get<std::int64_t>();
  store.config.layers = cfg.at("layers").get<std::int64_t>();
  store.config.heads = cfg.at("heads").get<std::int64_t>();
  store.config.ffn_dim = cfg.at("ffn_dim").get<std::int64_t>();
  store.config.adapter_bottleneck =
      cfg.at("adapter_bottleneck").get<std::int64_t>();
  store.config.max_positions = cfg.at("max_positions").get<std::int64_t>();
  store.config.languages =
      cfg.at("languages").get<std::vector<std::string>>();
  store.config.include_pooler = cfg.at("include_pooler").get<bool>();
  store.config.padding_offset = cfg.at("padding_offset").get<int>();
  store.config.layer_norm_eps = cfg.at("layer_norm_eps").get<double>();

  std::ifstream bf(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bf) throw IoError("cannot open checkpoint blob in " + dir);
  for (const auto& rec : manifest.at("tensors")) {
    const std::string name = rec.at("name").get<std::string>();
    const std::string part = rec.at("partition").get<std::string>();
    Partition p = Partition::SharedBody;
    if (part == "embeddings") p = Partition::Embeddings;
    else if (part == "adapter") p = Partition::Adapter;
    else if (part == "task_head") p = Partition::TaskHead;
    else if (part != "shared_body")
      throw DataError("unknown partition: " + part);
    std::string lang;
    if (rec.contains("lang")) lang = rec.at("lang").get<std::string>();
    Tensor t(rec.at("shape").get<std::vector<std::int64_t>>());
    bf.seekg(rec.at("offset").get<std::int64_t>());
    bf.read(reinterpret_cast<char*>(t.ptr()),
            static_cast<std::streamsize>(t.data.size() * 8));
    if (!bf) throw DataError("checkpoint blob truncated at tensor " + name);
    store.add(name, std::move(t), p, lang);
  }
  return store;
}

}  // namespace modlm::model
