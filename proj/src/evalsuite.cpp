// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "modlm/kernels.hpp"

namespace modlm::evalsuite {

namespace {

PRF prf_from_counts(std::int64_t tp, std::int64_t pred_n, std::int64_t gold_n) {
  PRF out;
  out.precision = pred_n > 0 ? static_cast<double>(tp) / pred_n : 0.0;
  out.recall = gold_n > 0 ? static_cast<double>(tp) / gold_n : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace

PRF span_f1_strict(const std::vector<std::vector<LabeledSpan>>& gold,
                   const std::vector<std::vector<LabeledSpan>>& pred) {
  if (gold.size() != pred.size())
    throw DataError("gold and predicted sentence counts differ");
  std::int64_t tp = 0, pred_n = 0, gold_n = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    gold_n += static_cast<std::int64_t>(gold[s].size());
    pred_n += static_cast<std::int64_t>(pred[s].size());
    std::multiset<LabeledSpan> gold_set(gold[s].begin(), gold[s].end());
    for (const auto& span : pred[s]) {
      const auto it = gold_set.find(span);
      if (it != gold_set.end()) {
        ++tp;
        gold_set.erase(it);
      }
    }
  }
  return prf_from_counts(tp, pred_n, gold_n);
}

Tensor layer_avg_embed(const model::ParamStore& params,
                       const tok::Vocabulary& vocab,
                       const std::string& sentence, const std::string& lang,
                       bool include_embedding_layer,
                       std::vector<tok::WordSpan>* word_spans) {
  std::vector<tok::WordSpan> spans;
  const std::vector<std::int32_t> ids = tok::encode(sentence, vocab, &spans);
  if (ids.empty()) throw DegenerateInput("empty sentence");
  std::vector<std::uint8_t> mask(ids.size(), 1);
  model::ForwardCache cache;
  model::forward(params, ids, mask, lang, &cache);
  const auto hidden = cache.all_hidden();
  const std::size_t first_layer = include_embedding_layer ? 0 : 1;
  const double denom = static_cast<double>(hidden.size() - first_layer);
  const std::int64_t H = params.config.hidden;

  // keep non-special rows; remap word spans onto the kept rows
  std::vector<std::int32_t> kept;
  std::vector<std::int32_t> new_index(ids.size(), -1);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (vocab.is_special(ids[t])) continue;
    new_index[t] = static_cast<std::int32_t>(kept.size());
    kept.push_back(static_cast<std::int32_t>(t));
  }
  Tensor out({static_cast<std::int64_t>(kept.size()), H});
  for (std::size_t r = 0; r < kept.size(); ++r) {
    double* dst = out.ptr() + static_cast<std::int64_t>(r) * H;
    for (std::size_t l = first_layer; l < hidden.size(); ++l) {
      const double* src =
          hidden[l]->ptr() + static_cast<std::int64_t>(kept[r]) * H;
      for (std::int64_t c = 0; c < H; ++c) dst[c] += src[c];
    }
    for (std::int64_t c = 0; c < H; ++c) dst[c] /= denom;
  }
  if (word_spans) {
    word_spans->clear();
    for (const auto& span : spans) {
      // a word whose subwords are all special (e.g. a literal "</s>")
      // contributes an empty span
      std::int32_t b = -1, e = -1;
      for (std::int32_t t = span.begin; t < span.end; ++t) {
        if (new_index[static_cast<std::size_t>(t)] < 0) continue;
        if (b < 0) b = new_index[static_cast<std::size_t>(t)];
        e = new_index[static_cast<std::size_t>(t)] + 1;
      }
      word_spans->push_back({b < 0 ? 0 : b, b < 0 ? 0 : e});
    }
  }
  return out;
}

Tensor word_vectors(const model::ParamStore& params,
                    const tok::Vocabulary& vocab, const std::string& sentence,
                    const std::string& lang, bool include_embedding_layer) {
  std::vector<tok::WordSpan> spans;
  const Tensor sub = layer_avg_embed(params, vocab, sentence, lang,
                                     include_embedding_layer, &spans);
  const std::int64_t H = params.config.hidden;
  std::vector<const tok::WordSpan*> nonempty;
  for (const auto& s : spans)
    if (s.end > s.begin) nonempty.push_back(&s);
  Tensor out({static_cast<std::int64_t>(nonempty.size()), H});
  for (std::size_t w = 0; w < nonempty.size(); ++w) {
    const auto& s = *nonempty[w];
    double* dst = out.ptr() + static_cast<std::int64_t>(w) * H;
    for (std::int32_t t = s.begin; t < s.end; ++t) {
      const double* src = sub.ptr() + static_cast<std::int64_t>(t) * H;
      for (std::int64_t c = 0; c < H; ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(s.end - s.begin);
    for (std::int64_t c = 0; c < H; ++c) dst[c] *= inv;
  }
  return out;
}

PRF bertscore(const Tensor& candidate_vectors,
              const Tensor& reference_vectors) {
  if (candidate_vectors.numel() == 0 || reference_vectors.numel() == 0)
    throw DegenerateInput("bertscore requires non-empty vector sets");
  const std::int64_t n = candidate_vectors.dim(0);
  const std::int64_t m = reference_vectors.dim(0);
  const std::int64_t d = candidate_vectors.dim(1);
  if (reference_vectors.dim(1) != d)
    throw DataError("vector dimensions differ");
  std::vector<double> sim(static_cast<std::size_t>(n * m));
  kern::cosine_matrix(candidate_vectors.ptr(), reference_vectors.ptr(),
                      sim.data(), n, m, d);
  PRF out;
  double p = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double best = sim[static_cast<std::size_t>(i * m)];
    for (std::int64_t j = 1; j < m; ++j)
      best = std::max(best, sim[static_cast<std::size_t>(i * m + j)]);
    p += best;
  }
  double r = 0.0;
  for (std::int64_t j = 0; j < m; ++j) {
    double best = sim[static_cast<std::size_t>(j)];
    for (std::int64_t i = 1; i < n; ++i)
      best = std::max(best, sim[static_cast<std::size_t>(i * m + j)]);
    r += best;
  }
  out.precision = p / static_cast<double>(n);
  out.recall = r / static_cast<double>(m);
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

RetrievalResult retrieve(const std::vector<Tensor>& query_vectors,
                         const std::vector<Tensor>& candidate_vectors) {
  if (query_vectors.size() != candidate_vectors.size())
    throw DataError("retrieval needs parallel query/candidate lists");
  RetrievalResult result;
  const auto n = static_cast<std::int64_t>(query_vectors.size());
  if (n == 0) throw DegenerateInput("empty retrieval task");
  // validate outside the parallel region: bertscore must not throw inside
  for (const auto& t : query_vectors)
    if (t.numel() == 0) throw DegenerateInput("empty query vector set");
  for (const auto& t : candidate_vectors)
    if (t.numel() == 0) throw DegenerateInput("empty candidate vector set");
  result.top1.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> scores(static_cast<std::size_t>(n * n), 0.0);
  // pairwise scoring is embarrassingly parallel; each cell written once
#pragma omp parallel for collapse(2) schedule(dynamic, 8) if (n > 2)
  for (std::int64_t q = 0; q < n; ++q) {
    for (std::int64_t c = 0; c < n; ++c) {
      scores[static_cast<std::size_t>(q * n + c)] =
          bertscore(candidate_vectors[static_cast<std::size_t>(c)],
                    query_vectors[static_cast<std::size_t>(q)])
              .f1;
    }
  }
  std::int64_t correct = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < n; ++c)
      if (scores[static_cast<std::size_t>(q * n + c)] >
          scores[static_cast<std::size_t>(q * n + best)])
        best = c;  // strict >: ties stay at the lowest index
    result.top1[static_cast<std::size_t>(q)] = best;
    if (best == q) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

// Maximum-weight assignment via the Hungarian algorithm with potentials
// (cost = -weight), O(n^3).
std::vector<std::int32_t> max_weight_assignment(
    const std::vector<double>& weights, std::int64_t n) {
  if (n == 0) return {};
  if (static_cast<std::int64_t>(weights.size()) != n * n)
    throw DataError("assignment matrix must be square");
  const double kInf = 1e300;
  // 1-indexed potentials over rows (u) and columns (v)
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<std::int32_t> match_col(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::int32_t> way(static_cast<std::size_t>(n) + 1, 0);
  auto cost = [&](std::int64_t i, std::int64_t j) {
    return -weights[static_cast<std::size_t>((i - 1) * n + (j - 1))];
  };
  for (std::int64_t i = 1; i <= n; ++i) {
    match_col[0] = static_cast<std::int32_t>(i);
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const std::int64_t i0 = match_col[static_cast<std::size_t>(j0)];
      double delta = kInf;
      std::int64_t j1 = 0;
      for (std::int64_t j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0, j) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(j0);
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match_col[static_cast<std::size_t>(j)])] +=
              delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      match_col[static_cast<std::size_t>(j0)] =
          match_col[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::int32_t> row_to_col(static_cast<std::size_t>(n), -1);
  for (std::int64_t j = 1; j <= n; ++j) {
    const std::int32_t i = match_col[static_cast<std::size_t>(j)];
    if (i >= 1) row_to_col[static_cast<std::size_t>(i - 1)] =
        static_cast<std::int32_t>(j - 1);
  }
  return row_to_col;
}

AlignmentSet simalign_match(const Tensor& src_vectors,
                            const Tensor& tgt_vectors) {
  if (src_vectors.numel() == 0 || tgt_vectors.numel() == 0)
    throw DegenerateInput("alignment requires non-empty vector sets");
  const std::int64_t n = src_vectors.dim(0);
  const std::int64_t m = tgt_vectors.dim(0);
  const std::int64_t d = src_vectors.dim(1);
  if (tgt_vectors.dim(1) != d) throw DataError("vector dimensions differ");
  std::vector<double> sim(static_cast<std::size_t>(n * m));
  kern::cosine_matrix(src_vectors.ptr(), tgt_vectors.ptr(), sim.data(), n, m,
                      d);
  // square matrix padded with zero-weight dummies; non-positive
  // similarities clamp to zero so the matching never profits from them
  const std::int64_t s = std::max(n, m);
  std::vector<double> w(static_cast<std::size_t>(s * s), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      w[static_cast<std::size_t>(i * s + j)] =
          std::max(sim[static_cast<std::size_t>(i * m + j)], 0.0);
  const auto assignment = max_weight_assignment(w, s);
  AlignmentSet out;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int32_t j = assignment[static_cast<std::size_t>(i)];
    if (j < 0 || j >= m) continue;
    if (sim[static_cast<std::size_t>(i * m + j)] > 0.0)
      out.pairs.insert({static_cast<std::int32_t>(i), j});
  }
  return out;
}

PRF alignment_f1(const AlignmentSet& pred, const AlignmentSet& gold) {
  std::int64_t tp = 0;
  for (const auto& p : pred.pairs) tp += gold.pairs.count(p) ? 1 : 0;
  return prf_from_counts(tp, static_cast<std::int64_t>(pred.pairs.size()),
                         static_cast<std::int64_t>(gold.pairs.size()));
}

AlignmentSet parse_pharaoh(const std::string& line) {
  AlignmentSet out;
  std::istringstream in(line);
  std::string tokenString;
  while (in >> tokenString) {
    const auto dash = tokenString.find('-');
    if (dash == std::string::npos || dash == 0 ||
        dash + 1 >= tokenString.size())
      throw DataError("bad alignment pair: " + tokenString);
    try {
      const int i = std::stoi(tokenString.substr(0, dash));
      const int j = std::stoi(tokenString.substr(dash + 1));
      if (i < 0 || j < 0) throw DataError("negative alignment index");
      out.pairs.insert({i, j});
    } catch (const std::exception&) {
      throw DataError("bad alignment pair: " + tokenString);
    }
  }
  return out;
}

std::string to_pharaoh(const AlignmentSet& alignment) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [i, j] : alignment.pairs) {
    if (!first) out << " ";
    out << i << "-" << j;
    first = false;
  }
  return out.str();
}

}  // namespace modlm::evalsuite
