// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/unigram_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "modlm/error.hpp"
#include "modlm/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace modlm::tok {

namespace {

// log prob assigned to uncovered characters inside training lattices;
// these virtual arcs keep every word segmentable but never produce counts
constexpr double kVirtualUnkLogProb = -30.0;
constexpr double kNegInf = -1e300;

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

struct WordEntry {
  std::u32string cps;  // marker-prefixed word
  std::int64_t freq = 0;
};

struct Arc {
  std::int32_t begin = 0;
  std::int32_t end = 0;
  std::int32_t piece = -1;  // -1 = virtual unk
};

struct Lattice {
  std::vector<Arc> arcs;
};

bool is_special_literal(const std::string& word) {
  static const std::vector<std::string> kLiterals = {
      "<s>", "<pad>", "</s>", "<unk>", "<mask>",
      "<medium>", "<year>", "<month>"};
  return std::find(kLiterals.begin(), kLiterals.end(), word) !=
         kLiterals.end();
}

// Piece table under training: surfaces (as codepoints), log probs, and a
// lookup index keyed by UTF-8 surface.
struct PieceTable {
  std::vector<std::u32string> surfaces;
  std::vector<double> log_probs;
  std::unordered_map<std::string, std::int32_t> index;
  int max_len = 1;

  void rebuild_index() {
    index.clear();
    max_len = 1;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      index[text::encode_utf8(surfaces[i])] = static_cast<std::int32_t>(i);
      max_len = std::max(max_len, static_cast<int>(surfaces[i].size()));
    }
  }
};

Lattice build_lattice(const std::u32string& word, const PieceTable& pieces) {
  Lattice lat;
  const int n = static_cast<int>(word.size());
  std::vector<char> has_arc(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int len = 1; len <= pieces.max_len && i + len <= n; ++len) {
      const std::string surf = text::encode_utf8(
          word.substr(static_cast<std::size_t>(i), static_cast<std::size_t>(len)));
      const auto it = pieces.index.find(surf);
      if (it == pieces.index.end()) continue;
      lat.arcs.push_back({i, i + len, it->second});
      has_arc[static_cast<std::size_t>(i)] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!has_arc[static_cast<std::size_t>(i)])
      lat.arcs.push_back({i, i + 1, -1});
  }
  std::sort(lat.arcs.begin(), lat.arcs.end(), [](const Arc& a, const Arc& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  return lat;
}

// forward log partition; arcs for `skip_piece` are ignored (-2 = none)
double forward_log_z(const Lattice& lat, int n,
                     const std::vector<double>& log_probs,
                     std::int32_t skip_piece) {
  std::vector<double> alpha(static_cast<std::size_t>(n) + 1, kNegInf);
  alpha[0] = 0.0;
  for (const Arc& arc : lat.arcs) {
    if (arc.piece == skip_piece) continue;
    const double lp = arc.piece >= 0
                          ? log_probs[static_cast<std::size_t>(arc.piece)]
                          : kVirtualUnkLogProb;
    const double via = alpha[static_cast<std::size_t>(arc.begin)];
    if (via == kNegInf) continue;
    auto& slot = alpha[static_cast<std::size_t>(arc.end)];
    slot = log_sum_exp(slot, via + lp);
  }
  return alpha[static_cast<std::size_t>(n)];
}

// expected piece counts for one word via forward-backward; returns logZ
double expected_counts(const Lattice& lat, int n,
                       const std::vector<double>& log_probs, double freq,
                       std::vector<std::pair<std::int32_t, double>>* out) {
  std::vector<double> alpha(static_cast<std::size_t>(n) + 1, kNegInf);
  std::vector<double> beta(static_cast<std::size_t>(n) + 1, kNegInf);
  alpha[0] = 0.0;
  for (const Arc& arc : lat.arcs) {
    const double lp = arc.piece >= 0
                          ? log_probs[static_cast<std::size_t>(arc.piece)]
                          : kVirtualUnkLogProb;
    const double via = alpha[static_cast<std::size_t>(arc.begin)];
    if (via == kNegInf) continue;
    auto& slot = alpha[static_cast<std::size_t>(arc.end)];
    slot = log_sum_exp(slot, via + lp);
  }
  beta[static_cast<std::size_t>(n)] = 0.0;
  for (auto it = lat.arcs.rbegin(); it != lat.arcs.rend(); ++it) {
    const Arc& arc = *it;
    const double lp = arc.piece >= 0
                          ? log_probs[static_cast<std::size_t>(arc.piece)]
                          : kVirtualUnkLogProb;
    const double via = beta[static_cast<std::size_t>(arc.end)];
    if (via == kNegInf) continue;
    auto& slot = beta[static_cast<std::size_t>(arc.begin)];
    slot = log_sum_exp(slot, via + lp);
  }
  const double log_z = alpha[static_cast<std::size_t>(n)];
  for (const Arc& arc : lat.arcs) {
    if (arc.piece < 0) continue;
    const double lp = log_probs[static_cast<std::size_t>(arc.piece)];
    const double a = alpha[static_cast<std::size_t>(arc.begin)];
    const double b = beta[static_cast<std::size_t>(arc.end)];
    if (a == kNegInf || b == kNegInf) continue;
    const double post = std::exp(a + lp + b - log_z);
    if (post > 0.0) out->push_back({arc.piece, freq * post});
  }
  return log_z;
}

}  // namespace

Vocabulary train_unigram(const std::vector<std::string>& sentences,
                         const TrainerOptions& options,
                         TrainerTrace* trace) {
  // ---- corpus statistics ------------------------------------------------
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& raw : sentences) {
    const std::string norm = text::normalize(raw);
    for (const auto& w : text::split_words(norm)) {
      if (is_special_literal(w)) continue;
      word_freq[kWordMarker + w] += 1;
    }
  }
  if (word_freq.empty()) throw EmptyCorpus("no words in training sample");

  std::vector<WordEntry> words;
  words.reserve(word_freq.size());
  for (const auto& [surf, freq] : word_freq)
    words.push_back({text::decode_utf8(surf), freq});

  // character coverage
  std::map<char32_t, std::int64_t> char_freq;
  std::int64_t total_chars = 0;
  for (const auto& w : words) {
    for (char32_t c : w.cps) {
      char_freq[c] += w.freq;
      total_chars += w.freq;
    }
  }
  std::vector<std::pair<std::int64_t, char32_t>> chars_by_freq;
  for (const auto& [c, f] : char_freq) chars_by_freq.push_back({f, c});
  std::sort(chars_by_freq.begin(), chars_by_freq.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first > b.first
                                        : a.second < b.second;
            });
  std::vector<char32_t> required_chars;
  std::int64_t covered = 0;
  for (const auto& [f, c] : chars_by_freq) {
    if (covered >= static_cast<std::int64_t>(
                       std::ceil(options.coverage *
                                 static_cast<double>(total_chars))))
      break;
    required_chars.push_back(c);
    covered += f;
  }

  const int num_specials = options.metadata_tokens ? 8 : 5;
  const int target_pieces = options.target_size - num_specials;
  if (target_pieces < static_cast<int>(required_chars.size()))
    throw ConfigError("target_size " + std::to_string(options.target_size) +
                      " is below alphabet size " +
                      std::to_string(required_chars.size()) + " + specials " +
                      std::to_string(num_specials));

  // ---- seed candidates ---------------------------------------------------
  std::unordered_map<std::string, std::int64_t> substr_freq;
  for (const auto& w : words) {
    const int n = static_cast<int>(w.cps.size());
    for (int i = 0; i < n; ++i) {
      for (int len = 2; len <= options.max_piece_len && i + len <= n; ++len) {
        substr_freq[text::encode_utf8(w.cps.substr(
            static_cast<std::size_t>(i), static_cast<std::size_t>(len)))] +=
            w.freq;
      }
    }
  }
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  ranked.reserve(substr_freq.size());
  for (const auto& [s, f] : substr_freq) ranked.push_back({f, s});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const auto seed_budget = static_cast<std::size_t>(
      std::max<double>(options.seed_multiplier * options.target_size,
                       static_cast<double>(required_chars.size())));

  PieceTable pieces;
  std::vector<double> seed_weight;
  for (char32_t c : required_chars) {
    pieces.surfaces.push_back(std::u32string(1, c));
    seed_weight.push_back(static_cast<double>(char_freq[c]));
  }
  for (const auto& [f, s] : ranked) {
    if (pieces.surfaces.size() >= seed_budget) break;
    pieces.surfaces.push_back(text::decode_utf8(s));
    seed_weight.push_back(static_cast<double>(f));
  }
  {
    double total = 0.0;
    for (double w : seed_weight) total += w;
    pieces.log_probs.resize(seed_weight.size());
    for (std::size_t i = 0; i < seed_weight.size(); ++i)
      pieces.log_probs[i] = std::log(seed_weight[i]) - std::log(total);
  }
  pieces.rebuild_index();

  // ---- EM + prune rounds ---------------------------------------------------
  std::vector<Lattice> lattices(words.size());
  std::vector<double> word_ll(words.size(), 0.0);

  auto rebuild_lattices = [&]() {
    const auto n = static_cast<std::int64_t>(words.size());
#pragma omp parallel for schedule(dynamic, 32) if (n > 16)
    for (std::int64_t i = 0; i < n; ++i)
      lattices[static_cast<std::size_t>(i)] =
          build_lattice(words[static_cast<std::size_t>(i)].cps, pieces);
  };

  // one EM iteration; returns corpus log-likelihood under the entering
  // probabilities and leaves per-word lls in word_ll
  std::vector<std::vector<std::pair<std::int32_t, double>>> word_counts(
      words.size());
  auto em_iteration = [&](bool update_probs) {
    const auto n = static_cast<std::int64_t>(words.size());
#pragma omp parallel for schedule(dynamic, 32) if (n > 16)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      word_counts[idx].clear();
      word_ll[idx] =
          static_cast<double>(words[idx].freq) *
          expected_counts(lattices[idx],
                          static_cast<int>(words[idx].cps.size()),
                          pieces.log_probs,
                          static_cast<double>(words[idx].freq),
                          &word_counts[idx]);
    }
    double ll = 0.0;
    std::vector<double> counts(pieces.surfaces.size(), 0.0);
    // merge in word order: deterministic at any thread count
    for (std::size_t i = 0; i < words.size(); ++i) {
      ll += word_ll[i];
      for (const auto& [pid, c] : word_counts[i])
        counts[static_cast<std::size_t>(pid)] += c;
    }
    if (update_probs) {
      double total = 0.0;
      std::vector<char> keep(pieces.surfaces.size(), 1);
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const bool single = pieces.surfaces[i].size() == 1;
        if (!single && counts[i] <= options.min_expected_fraction *
                                        static_cast<double>(total_chars))
          keep[i] = 0;
        if (keep[i]) {
          counts[i] = std::max(counts[i], 1e-12);
          total += counts[i];
        }
      }
      PieceTable next;
      for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!keep[i]) continue;
        next.surfaces.push_back(pieces.surfaces[i]);
        next.log_probs.push_back(std::log(counts[i]) - std::log(total));
      }
      const bool shrank = next.surfaces.size() != pieces.surfaces.size();
      pieces.surfaces = std::move(next.surfaces);
      pieces.log_probs = std::move(next.log_probs);
      if (shrank) {
        pieces.rebuild_index();
        rebuild_lattices();
      }
    }
    return ll;
  };

  // fills word_ll under the current probabilities and returns the total
  auto recompute_ll = [&]() {
    const auto n = static_cast<std::int64_t>(words.size());
#pragma omp parallel for schedule(dynamic, 32) if (n > 16)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      word_ll[idx] = static_cast<double>(words[idx].freq) *
                     forward_log_z(lattices[idx],
                                   static_cast<int>(words[idx].cps.size()),
                                   pieces.log_probs, -2);
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i) ll += word_ll[i];
    return ll;
  };

  rebuild_lattices();
  while (true) {
    for (int it = 0; it < options.em_iters_per_round; ++it)
      em_iteration(/*update_probs=*/true);
    // per-word likelihoods under the probabilities the prune losses use
    const double ll = recompute_ll();

    const int excess =
        static_cast<int>(pieces.surfaces.size()) - target_pieces;
    if (excess <= 0) break;

    // exact likelihood loss per prunable piece
    std::vector<std::int32_t> prunable;
    for (std::size_t i = 0; i < pieces.surfaces.size(); ++i)
      if (pieces.surfaces[i].size() >= 2)
        prunable.push_back(static_cast<std::int32_t>(i));

    // inverted index piece -> words
    std::vector<std::vector<std::int32_t>> piece_words(
        pieces.surfaces.size());
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::int32_t last = -1;
      for (const Arc& arc : lattices[w].arcs) {
        if (arc.piece >= 0 && arc.piece != last) {
          // arcs are begin-sorted; dedup consecutive ids cheaply then unique
          piece_words[static_cast<std::size_t>(arc.piece)].push_back(
              static_cast<std::int32_t>(w));
          last = arc.piece;
        }
      }
    }
    for (auto& lst : piece_words) {
      std::sort(lst.begin(), lst.end());
      lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }

    std::vector<double> loss(pieces.surfaces.size(), 0.0);
    const auto np = static_cast<std::int64_t>(prunable.size());
#pragma omp parallel for schedule(dynamic, 8) if (np > 8)
    for (std::int64_t pi = 0; pi < np; ++pi) {
      const std::int32_t pid = prunable[static_cast<std::size_t>(pi)];
      double acc = 0.0;
      for (const std::int32_t w : piece_words[static_cast<std::size_t>(pid)]) {
        const auto wi = static_cast<std::size_t>(w);
        const double lz_full =
            word_ll[wi] / static_cast<double>(words[wi].freq);
        const double lz_wo =
            forward_log_z(lattices[wi], static_cast<int>(words[wi].cps.size()),
                          pieces.log_probs, pid);
        acc += static_cast<double>(words[wi].freq) * (lz_full - lz_wo);
      }
      loss[static_cast<std::size_t>(pid)] = acc;
    }

    const int prune_k = std::min(
        excess,
        std::max(1, static_cast<int>(options.prune_fraction *
                                     static_cast<double>(prunable.size()))));
    std::vector<std::int32_t> order = prunable;
    std::sort(order.begin(), order.end(),
              [&](std::int32_t a, std::int32_t b) {
                const double la = loss[static_cast<std::size_t>(a)];
                const double lb = loss[static_cast<std::size_t>(b)];
                if (la != lb) return la < lb;
                return pieces.surfaces[static_cast<std::size_t>(a)] <
                       pieces.surfaces[static_cast<std::size_t>(b)];
              });
    const int k = std::min<int>(prune_k, static_cast<int>(order.size()));

    PruneRound round;
    if (trace) {
      round.ll_before = ll;
      for (const std::int32_t pid : prunable)
        round.losses.push_back(
            {text::encode_utf8(pieces.surfaces[static_cast<std::size_t>(pid)]),
             loss[static_cast<std::size_t>(pid)]});
    }

    std::vector<char> drop(pieces.surfaces.size(), 0);
    for (int i = 0; i < k; ++i) {
      drop[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
      if (trace)
        round.dropped.push_back(text::encode_utf8(
            pieces.surfaces[static_cast<std::size_t>(
                order[static_cast<std::size_t>(i)])]));
    }

    if (trace) {
      // recompute the corpus LL with dropped pieces removed, before the
      // renormalization, so the prune rule is checkable from outside
      PieceTable pruned;
      for (std::size_t i = 0; i < pieces.surfaces.size(); ++i) {
        if (drop[i]) continue;
        pruned.surfaces.push_back(pieces.surfaces[i]);
        pruned.log_probs.push_back(pieces.log_probs[i]);
      }
      pruned.rebuild_index();
      double ll_after = 0.0;
      for (const auto& w : words) {
        const Lattice lat = build_lattice(w.cps, pruned);
        ll_after += static_cast<double>(w.freq) *
                    forward_log_z(lat, static_cast<int>(w.cps.size()),
                                  pruned.log_probs, -2);
      }
      round.ll_after_drop = ll_after;
      trace->rounds.push_back(std::move(round));
    }

    // drop and renormalize the survivors
    PieceTable next;
    double total_p = 0.0;
    for (std::size_t i = 0; i < pieces.surfaces.size(); ++i)
      if (!drop[i]) total_p += std::exp(pieces.log_probs[i]);
    const double log_total = std::log(total_p);
    for (std::size_t i = 0; i < pieces.surfaces.size(); ++i) {
      if (drop[i]) continue;
      next.surfaces.push_back(pieces.surfaces[i]);
      next.log_probs.push_back(pieces.log_probs[i] - log_total);
    }
    pieces.surfaces = std::move(next.surfaces);
    pieces.log_probs = std::move(next.log_probs);
    pieces.rebuild_index();
    rebuild_lattices();
  }

  // ---- finalize ------------------------------------------------------------
  std::vector<std::size_t> order(pieces.surfaces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pieces.log_probs[a] != pieces.log_probs[b])
      return pieces.log_probs[a] > pieces.log_probs[b];
    return pieces.surfaces[a] < pieces.surfaces[b];
  });
  std::vector<Piece> final_pieces;
  final_pieces.reserve(order.size());
  for (std::size_t i : order)
    final_pieces.push_back(
        {text::encode_utf8(pieces.surfaces[i]), pieces.log_probs[i]});

  std::map<std::string, std::string> header;
  header["normalizer"] = text::kNormalizerName;
  {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", options.coverage);
    header["coverage"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", options.alpha);
    header["alpha"] = buf;
  }
  header["seed"] = std::to_string(options.seed);
  header["max_piece_len"] = std::to_string(options.max_piece_len);
  header["target_size"] = std::to_string(options.target_size);
  return Vocabulary::make(std::move(final_pieces), options.metadata_tokens,
                          std::move(header));
}

}  // namespace modlm::tok
