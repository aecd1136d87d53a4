// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/runconfig.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace modlm::cli {

namespace {

struct TomlValue {
  enum class Kind { String, Number, Bool, Array } kind = Kind::String;
  std::string scalar;
  std::vector<std::string> array;  // string scalars
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string parse_scalar_token(const std::string& raw) {
  const std::string t = trim(raw);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      if (t[i] == '\\' && i + 2 < t.size()) {
        ++i;
        switch (t[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: out.push_back(t[i]);
        }
      } else {
        out.push_back(t[i]);
      }
    }
    return out;
  }
  return t;
}

TomlValue parse_value(const std::string& raw) {
  const std::string t = trim(raw);
  TomlValue v;
  if (t.empty()) throw ConfigError("empty value");
  if (t.front() == '[') {
    if (t.back() != ']') throw ConfigError("unterminated array: " + t);
    v.kind = TomlValue::Kind::Array;
    std::string inner = t.substr(1, t.size() - 2);
    std::string cur;
    bool in_string = false;
    for (char c : inner) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!trim(cur).empty()) v.array.push_back(parse_scalar_token(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!trim(cur).empty()) v.array.push_back(parse_scalar_token(cur));
    return v;
  }
  if (t.front() == '"') {
    v.kind = TomlValue::Kind::String;
    v.scalar = parse_scalar_token(t);
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = TomlValue::Kind::Bool;
    v.scalar = t;
    return v;
  }
  v.kind = TomlValue::Kind::Number;
  v.scalar = t;
  return v;
}

std::map<std::string, TomlValue> parse_toml_subset(const std::string& text) {
  std::map<std::string, TomlValue> values;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(strip_comment(line));
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) +
                          ": bad section header");
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": empty section name");
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (values.count(full))
      throw ConfigError("duplicate key: " + full);
    values[full] = parse_value(stripped.substr(eq + 1));
  }
  return values;
}

double to_double(const TomlValue& v, const std::string& key) {
  try {
    return std::stod(v.scalar);
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ", got " + v.scalar);
  }
}

std::int64_t to_int(const TomlValue& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::int64_t x = std::stoll(v.scalar, &pos);
    if (pos != v.scalar.size()) throw std::invalid_argument(v.scalar);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer for " + key + ", got " + v.scalar);
  }
}

std::uint64_t to_uint(const TomlValue& v, const std::string& key) {
  try {
    return std::stoull(v.scalar);
  } catch (const std::exception&) {
    throw ConfigError("expected an unsigned integer for " + key);
  }
}

bool to_bool(const TomlValue& v, const std::string& key) {
  if (v.scalar == "true") return true;
  if (v.scalar == "false") return false;
  throw ConfigError("expected true/false for " + key);
}

std::vector<std::string> to_string_list(const TomlValue& v) {
  if (v.kind == TomlValue::Kind::Array) return v.array;
  return {v.scalar};
}

using Setter = std::function<void(RunConfig&, const TomlValue&, const std::string&)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> kSchema = {
      {"corpus.paths",
       [](RunConfig& c, const TomlValue& v, const std::string&) {
         c.corpus.paths = to_string_list(v);
       }},
      {"corpus.languages",
       [](RunConfig& c, const TomlValue& v, const std::string&) {
         c.corpus.languages = to_string_list(v);
       }},
      {"corpus.alpha",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.corpus.alpha = to_double(v, k);
       }},
      {"corpus.holdout_min",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.corpus.holdout_min = static_cast<int>(to_int(v, k));
       }},
      {"corpus.cutoff_year",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.corpus.cutoff_year = static_cast<int>(to_int(v, k));
       }},
      {"corpus.variant",
       [](RunConfig& c, const TomlValue& v, const std::string&) {
         c.corpus.variant = v.scalar;
       }},
      {"vocab.size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.size = static_cast<int>(to_int(v, k));
       }},
      {"vocab.coverage",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.coverage = to_double(v, k);
       }},
      {"vocab.seed",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.seed = to_uint(v, k);
       }},
      {"vocab.seed_multiplier",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.seed_multiplier = to_double(v, k);
       }},
      {"vocab.prune_fraction",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.prune_fraction = to_double(v, k);
       }},
      {"vocab.em_iters",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.em_iters = static_cast<int>(to_int(v, k));
       }},
      {"vocab.max_piece_len",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.max_piece_len = static_cast<int>(to_int(v, k));
       }},
      {"vocab.alpha",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.alpha = to_double(v, k);
       }},
      {"vocab.sample_sentences",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.vocab.sample_sentences = to_int(v, k);
       }},
      {"model.vocab_size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.vocab_size = to_int(v, k);
       }},
      {"model.hidden",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.hidden = to_int(v, k);
       }},
      {"model.layers",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.layers = to_int(v, k);
       }},
      {"model.heads",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.heads = to_int(v, k);
       }},
      {"model.ffn_dim",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.ffn_dim = to_int(v, k);
       }},
      {"model.adapter_bottleneck",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.adapter_bottleneck = to_int(v, k);
       }},
      {"model.max_positions",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.max_positions = to_int(v, k);
       }},
      {"model.include_pooler",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.include_pooler = to_bool(v, k);
       }},
      {"model.padding_offset",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.padding_offset = static_cast<int>(to_int(v, k));
       }},
      {"model.init_seed",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.model.init_seed = to_uint(v, k);
       }},
      {"pretrain.peak_lr",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.peak_lr = to_double(v, k);
       }},
      {"pretrain.warmup_steps",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.warmup_steps = static_cast<int>(to_int(v, k));
       }},
      {"pretrain.total_steps",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.total_steps = static_cast<int>(to_int(v, k));
       }},
      {"pretrain.batch_size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.batch_size = static_cast<int>(to_int(v, k));
       }},
      {"pretrain.accumulation",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.accumulation = static_cast<int>(to_int(v, k));
       }},
      {"pretrain.span",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.span = static_cast<int>(to_int(v, k));
       }},
      {"pretrain.mask_prob",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.mask_prob = to_double(v, k);
       }},
      {"pretrain.mask_split_mask",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.mask_split_mask = to_double(v, k);
       }},
      {"pretrain.mask_split_random",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.mask_split_random = to_double(v, k);
       }},
      {"pretrain.mask_split_keep",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.mask_split_keep = to_double(v, k);
       }},
      {"pretrain.freeze",
       [](RunConfig& c, const TomlValue& v, const std::string&) {
         c.pretrain.freeze = v.scalar;
       }},
      {"pretrain.seed",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.seed = to_uint(v, k);
       }},
      {"pretrain.mask_seed",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.pretrain.mask_seed = to_uint(v, k);
       }},
      {"finetune.ner_lr",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.ner_lr = to_double(v, k);
       }},
      {"finetune.ner_batch_size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.ner_batch_size = static_cast<int>(to_int(v, k));
       }},
      {"finetune.ner_epochs",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.ner_epochs = static_cast<int>(to_int(v, k));
       }},
      {"finetune.hipe_lr",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.hipe_lr = to_double(v, k);
       }},
      {"finetune.hipe_batch_size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.hipe_batch_size = static_cast<int>(to_int(v, k));
       }},
      {"finetune.hipe_epochs",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.hipe_epochs = static_cast<int>(to_int(v, k));
       }},
      {"finetune.stance_lr",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.stance_lr = to_double(v, k);
       }},
      {"finetune.stance_batch_size",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.stance_batch_size = static_cast<int>(to_int(v, k));
       }},
      {"finetune.stance_epochs",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.stance_epochs = static_cast<int>(to_int(v, k));
       }},
      {"finetune.pair_max_len",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.pair_max_len = static_cast<int>(to_int(v, k));
       }},
      {"finetune.seed",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.finetune.seed = to_uint(v, k);
       }},
      {"eval.include_embedding_layer",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.eval.include_embedding_layer = to_bool(v, k);
       }},
      {"threads",
       [](RunConfig& c, const TomlValue& v, const std::string& k) {
         c.threads = static_cast<int>(to_int(v, k));
       }},
  };
  return kSchema;
}

void apply_values(RunConfig& config,
                  const std::map<std::string, TomlValue>& values) {
  const auto& s = schema();
  for (const auto& [key, value] : values) {
    const auto it = s.find(key);
    if (it == s.end()) throw ConfigError("unknown config key: " + key);
    it->second(config, value, key);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (corpus.alpha < 0.0 || corpus.alpha > 1.0 || vocab.alpha < 0.0 ||
      vocab.alpha > 1.0)
    throw ConfigError("alpha must lie in [0, 1]");
  if (corpus.variant != "new_vocab" && corpus.variant != "reused_vocab")
    throw ConfigError("corpus.variant must be new_vocab or reused_vocab");
  if (pretrain.span < 2) throw ConfigError("pretrain.span must be >= 2");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::string RunConfig::to_manifest_json() const {
  nlohmann::ordered_json j;
  j["corpus"]["paths"] = corpus.paths;
  j["corpus"]["languages"] = corpus.languages;
  j["corpus"]["alpha"] = corpus.alpha;
  j["corpus"]["holdout_min"] = corpus.holdout_min;
  j["corpus"]["cutoff_year"] = corpus.cutoff_year;
  j["corpus"]["variant"] = corpus.variant;
  j["vocab"]["size"] = vocab.size;
  j["vocab"]["coverage"] = vocab.coverage;
  j["vocab"]["seed"] = vocab.seed;
  j["vocab"]["seed_multiplier"] = vocab.seed_multiplier;
  j["vocab"]["prune_fraction"] = vocab.prune_fraction;
  j["vocab"]["em_iters"] = vocab.em_iters;
  j["vocab"]["max_piece_len"] = vocab.max_piece_len;
  j["vocab"]["alpha"] = vocab.alpha;
  j["vocab"]["sample_sentences"] = vocab.sample_sentences;
  j["model"]["vocab_size"] = model.vocab_size;
  j["model"]["hidden"] = model.hidden;
  j["model"]["layers"] = model.layers;
  j["model"]["heads"] = model.heads;
  j["model"]["ffn_dim"] = model.ffn_dim;
  j["model"]["adapter_bottleneck"] = model.adapter_bottleneck;
  j["model"]["max_positions"] = model.max_positions;
  j["model"]["include_pooler"] = model.include_pooler;
  j["model"]["padding_offset"] = model.padding_offset;
  j["model"]["init_seed"] = model.init_seed;
  j["pretrain"]["peak_lr"] = pretrain.peak_lr;
  j["pretrain"]["warmup_steps"] = pretrain.warmup_steps;
  j["pretrain"]["total_steps"] = pretrain.total_steps;
  j["pretrain"]["batch_size"] = pretrain.batch_size;
  j["pretrain"]["accumulation"] = pretrain.accumulation;
  j["pretrain"]["span"] = pretrain.span;
  j["pretrain"]["mask_prob"] = pretrain.mask_prob;
  j["pretrain"]["mask_split_mask"] = pretrain.mask_split_mask;
  j["pretrain"]["mask_split_random"] = pretrain.mask_split_random;
  j["pretrain"]["mask_split_keep"] = pretrain.mask_split_keep;
  j["pretrain"]["freeze"] = pretrain.freeze;
  j["pretrain"]["seed"] = pretrain.seed;
  j["pretrain"]["mask_seed"] = pretrain.mask_seed;
  j["finetune"]["ner_lr"] = finetune.ner_lr;
  j["finetune"]["ner_batch_size"] = finetune.ner_batch_size;
  j["finetune"]["ner_epochs"] = finetune.ner_epochs;
  j["finetune"]["hipe_lr"] = finetune.hipe_lr;
  j["finetune"]["hipe_batch_size"] = finetune.hipe_batch_size;
  j["finetune"]["hipe_epochs"] = finetune.hipe_epochs;
  j["finetune"]["stance_lr"] = finetune.stance_lr;
  j["finetune"]["stance_batch_size"] = finetune.stance_batch_size;
  j["finetune"]["stance_epochs"] = finetune.stance_epochs;
  j["finetune"]["pair_max_len"] = finetune.pair_max_len;
  j["finetune"]["seed"] = finetune.seed;
  j["eval"]["include_embedding_layer"] = eval.include_embedding_layer;
  j["threads"] = threads;
  return j.dump(2);
}

RunConfig RunConfig::from_manifest_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
  RunConfig c;
  std::map<std::string, TomlValue> values;
  std::function<void(const nlohmann::json&, const std::string&)> flatten =
      [&](const nlohmann::json& node, const std::string& prefix) {
        for (const auto& [key, value] : node.items()) {
          const std::string full = prefix.empty() ? key : prefix + "." + key;
          if (value.is_object()) {
            flatten(value, full);
            continue;
          }
          TomlValue tv;
          if (value.is_array()) {
            tv.kind = TomlValue::Kind::Array;
            for (const auto& item : value)
              tv.array.push_back(item.is_string()
                                     ? item.get<std::string>()
                                     : item.dump());
          } else if (value.is_string()) {
            tv.kind = TomlValue::Kind::String;
            tv.scalar = value.get<std::string>();
          } else if (value.is_boolean()) {
            tv.kind = TomlValue::Kind::Bool;
            tv.scalar = value.get<bool>() ? "true" : "false";
          } else {
            tv.kind = TomlValue::Kind::Number;
            tv.scalar = value.dump();
          }
          values[full] = std::move(tv);
        }
      };
  flatten(j, "");
  apply_values(c, values);
  c.validate();
  return c;
}

RunConfig parse_config_string(const std::string& content) {
  RunConfig config;
  apply_values(config, parse_toml_subset(content));
  config.validate();
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " +
                      assignment);
  std::map<std::string, TomlValue> values;
  values[assignment.substr(0, eq)] = parse_value(assignment.substr(eq + 1));
  apply_values(config, values);
  config.validate();
}

}  // namespace modlm::cli
