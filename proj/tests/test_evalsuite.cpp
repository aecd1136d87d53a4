// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "modlm/evalsuite.hpp"
#include "modlm/kernels.hpp"
#include "modlm/rng.hpp"

using namespace modlm;
using namespace modlm::evalsuite;

namespace {

Tensor rows(const std::vector<std::vector<double>>& data) {
  Tensor t({static_cast<std::int64_t>(data.size()),
            static_cast<std::int64_t>(data[0].size())});
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data[0].size(); ++j)
      t.at2(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) =
          data[i][j];
  return t;
}

// exhaustive max-weight matching oracle: tries every injective assignment
// of the smaller side, non-positive pairs excluded
double oracle_match_weight(const std::vector<double>& sim, std::int64_t n,
                           std::int64_t m) {
  std::vector<std::int32_t> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0.0;
  // permute columns; row i takes cols[i] when i < m (or skip via sentinel)
  // to cover n > m, pad the column list with -1 sentinels
  std::vector<std::int32_t> padded = cols;
  for (std::int64_t i = m; i < n; ++i) padded.push_back(-1);
  std::sort(padded.begin(), padded.end());
  do {
    double w = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int32_t j = padded[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      const double s = sim[static_cast<std::size_t>(i * m + j)];
      if (s > 0.0) w += s;
    }
    best = std::max(best, w);
  } while (std::next_permutation(padded.begin(), padded.end()));
  return best;
}

double match_weight(const AlignmentSet& a, const std::vector<double>& sim,
                    std::int64_t m) {
  double w = 0.0;
  for (const auto& [i, j] : a.pairs)
    w += sim[static_cast<std::size_t>(i * m + j)];
  return w;
}

}  // namespace

TEST_CASE("span_f1_strict worked examples") {
  SUBCASE("pred == gold scores 1") {
    const std::vector<std::vector<LabeledSpan>> gold = {
        {{0, 2, "PER"}, {3, 4, "LOC"}}, {{1, 2, "ORG"}}};
    const auto prf = span_f1_strict(gold, gold);
    CHECK(prf.precision == 1.0);
    CHECK(prf.recall == 1.0);
    CHECK(prf.f1 == 1.0);
  }
  SUBCASE("boundary off by one contributes nothing") {
    const std::vector<std::vector<LabeledSpan>> gold = {{{0, 2, "PER"}}};
    const std::vector<std::vector<LabeledSpan>> pred = {{{0, 3, "PER"}}};
    const auto prf = span_f1_strict(gold, pred);
    CHECK(prf.f1 == 0.0);
  }
  SUBCASE("half right gives 0.5 all around") {
    const std::vector<std::vector<LabeledSpan>> gold = {
        {{0, 2, "PER"}, {3, 4, "LOC"}}};
    const std::vector<std::vector<LabeledSpan>> pred = {
        {{0, 2, "PER"}, {3, 4, "ORG"}}};
    const auto prf = span_f1_strict(gold, pred);
    CHECK(prf.precision == doctest::Approx(0.5));
    CHECK(prf.recall == doctest::Approx(0.5));
    CHECK(prf.f1 == doctest::Approx(0.5));
  }
  SUBCASE("removing a correct span never increases F1") {
    const std::vector<std::vector<LabeledSpan>> gold = {
        {{0, 2, "PER"}, {3, 4, "LOC"}, {5, 6, "ORG"}}};
    std::vector<std::vector<LabeledSpan>> pred = {
        {{0, 2, "PER"}, {3, 4, "LOC"}}};
    const double full = span_f1_strict(gold, pred).f1;
    pred[0].pop_back();
    CHECK(span_f1_strict(gold, pred).f1 <= full);
  }
  SUBCASE("empty prediction uses the zero convention") {
    const std::vector<std::vector<LabeledSpan>> gold = {{{0, 1, "PER"}}};
    const std::vector<std::vector<LabeledSpan>> pred = {{}};
    const auto prf = span_f1_strict(gold, pred);
    CHECK(prf.precision == 0.0);
    CHECK(prf.recall == 0.0);
    CHECK(prf.f1 == 0.0);
  }
}

TEST_CASE("bertscore worked examples") {
  SUBCASE("identical sequences score (1,1,1) exactly") {
    const auto v = rows({{0.3, 0.4}, {-0.8, 0.1}, {0.0, 2.0}});
    const auto prf = bertscore(v, v);
    CHECK(prf.precision == 1.0);
    CHECK(prf.recall == 1.0);
    CHECK(prf.f1 == 1.0);
  }
  SUBCASE("mutually orthogonal sets score 0") {
    const auto a = rows({{1.0, 0.0, 0.0}});
    const auto b = rows({{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
    const auto prf = bertscore(a, b);
    CHECK(prf.precision == 0.0);
    CHECK(prf.recall == 0.0);
    CHECK(prf.f1 == 0.0);
  }
  SUBCASE("cand {e1} vs ref {e1, e2}: P=1, R=0.5, F=2/3") {
    const auto cand = rows({{1.0, 0.0}});
    const auto ref = rows({{1.0, 0.0}, {0.0, 1.0}});
    const auto prf = bertscore(cand, ref);
    CHECK(prf.precision == doctest::Approx(1.0));
    CHECK(prf.recall == doctest::Approx(0.5));
    CHECK(prf.f1 == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("role swap symmetry: P(a,b) = R(b,a) exactly") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::vector<double>> da(2 + rng.uniform_int(4)),
          db(2 + rng.uniform_int(4));
      for (auto& row : da) {
        row.resize(5);
        for (auto& x : row) x = rng.normal();
      }
      for (auto& row : db) {
        row.resize(5);
        for (auto& x : row) x = rng.normal();
      }
      const auto ab = bertscore(rows(da), rows(db));
      const auto ba = bertscore(rows(db), rows(da));
      CHECK(ab.precision == ba.recall);
      CHECK(ab.recall == ba.precision);
    }
  }
  SUBCASE("invariant to positive rescaling of any vector") {
    const auto a = rows({{0.3, -0.4, 1.0}, {2.0, 0.1, 0.0}});
    const auto b = rows({{0.5, 0.5, 0.5}, {-1.0, 0.2, 0.3}});
    auto a_scaled = a;
    for (std::int64_t j = 0; j < 3; ++j) a_scaled.at2(0, j) *= 17.0;
    for (std::int64_t j = 0; j < 3; ++j) a_scaled.at2(1, j) *= 0.003;
    const auto p1 = bertscore(a, b);
    const auto p2 = bertscore(a_scaled, b);
    CHECK(std::abs(p1.f1 - p2.f1) < 1e-12);
    CHECK(std::abs(p1.precision - p2.precision) < 1e-12);
  }
  SUBCASE("zero vectors score 0 against everything") {
    const auto a = rows({{0.0, 0.0}});
    const auto b = rows({{1.0, 0.0}});
    CHECK(bertscore(a, b).f1 == 0.0);
  }
  SUBCASE("empty side is degenerate") {
    Tensor empty({0, 2});
    CHECK_THROWS_AS(bertscore(empty, rows({{1.0, 0.0}})), DegenerateInput);
  }
}

TEST_CASE("retrieve") {
  SUBCASE("self retrieval is perfect with ties broken to the lowest index") {
    std::vector<Tensor> sents;
    Rng rng(9);
    for (int i = 0; i < 10; ++i) {
      std::vector<std::vector<double>> rs(2 + i % 3);
      for (auto& r : rs) {
        r.resize(6);
        for (auto& x : r) x = rng.normal();
      }
      sents.push_back(rows(rs));
    }
    const auto result = retrieve(sents, sents);
    CHECK(result.accuracy == 1.0);
    for (std::size_t i = 0; i < sents.size(); ++i)
      CHECK(result.top1[i] == static_cast<std::int64_t>(i));
  }
  SUBCASE("random embeddings retrieve near chance") {
    Rng rng(31);
    std::vector<Tensor> queries, cands;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
      std::vector<std::vector<double>> q(3), c(3);
      for (auto& r : q) {
        r.resize(8);
        for (auto& x : r) x = rng.normal();
      }
      for (auto& r : c) {
        r.resize(8);
        for (auto& x : r) x = rng.normal();
      }
      queries.push_back(rows(q));
      cands.push_back(rows(c));
    }
    const auto result = retrieve(queries, cands);
    CHECK(result.accuracy <= 0.1);  // chance is 0.01
  }
}

TEST_CASE("simalign_match") {
  SUBCASE("orthonormal shared basis aligns the diagonal") {
    const auto a = rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
    const auto m = simalign_match(a, a);
    CHECK(m.pairs == std::set<std::pair<std::int32_t, std::int32_t>>{
                         {0, 0}, {1, 1}, {2, 2}});
  }
  SUBCASE("worked 2x2: diagonal beats anti-diagonal 1.7 > 0.3") {
    // vectors engineered so cos matches [[0.9, 0.1], [0.2, 0.8]]
    // approximately; instead drive the assignment directly
    const std::vector<double> w = {0.9, 0.1, 0.2, 0.8};
    const auto assign = max_weight_assignment(w, 2);
    CHECK(assign[0] == 0);
    CHECK(assign[1] == 1);
  }
  SUBCASE("non-positive similarities are excluded") {
    const auto a = rows({{1.0, 0.0}});
    const auto b = rows({{-1.0, 0.0}});  // cosine -1
    const auto m = simalign_match(a, b);
    CHECK(m.pairs.empty());
  }
  SUBCASE("matching weight equals the factorial oracle up to 7x7") {
    Rng rng(17);
    for (int trial = 0; trial < 120; ++trial) {
      const std::int64_t n = 1 + rng.uniform_int(7);
      const std::int64_t m = 1 + rng.uniform_int(7);
      const std::int64_t d = 3;
      std::vector<std::vector<double>> av(static_cast<std::size_t>(n)),
          bv(static_cast<std::size_t>(m));
      for (auto& r : av) {
        r.resize(static_cast<std::size_t>(d));
        for (auto& x : r) x = rng.normal();
      }
      for (auto& r : bv) {
        r.resize(static_cast<std::size_t>(d));
        for (auto& x : r) x = rng.normal();
      }
      const auto src = rows(av);
      const auto tgt = rows(bv);
      std::vector<double> sim(static_cast<std::size_t>(n * m));
      kern::cosine_matrix(src.ptr(), tgt.ptr(), sim.data(), n, m, d);
      const auto match = simalign_match(src, tgt);
      const double got = match_weight(match, sim, m);
      const double want = oracle_match_weight(sim, n, m);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      // each word at most once
      std::set<std::int32_t> used_src, used_tgt;
      for (const auto& [i, j] : match.pairs) {
        CHECK(used_src.insert(i).second);
        CHECK(used_tgt.insert(j).second);
        CHECK(sim[static_cast<std::size_t>(i * m + j)] > 0.0);
      }
    }
  }
}

TEST_CASE("alignment_f1") {
  AlignmentSet gold;
  gold.pairs = {{0, 0}, {1, 1}};
  SUBCASE("pred == gold scores 1") {
    const auto prf = alignment_f1(gold, gold);
    CHECK(prf.f1 == 1.0);
  }
  SUBCASE("empty prediction: zero convention") {
    const auto prf = alignment_f1({}, gold);
    CHECK(prf.precision == 0.0);
    CHECK(prf.recall == 0.0);
    CHECK(prf.f1 == 0.0);
  }
  SUBCASE("half recall worked example") {
    AlignmentSet pred;
    pred.pairs = {{0, 0}};
    const auto prf = alignment_f1(pred, gold);
    CHECK(prf.precision == doctest::Approx(1.0));
    CHECK(prf.recall == doctest::Approx(0.5));
    CHECK(prf.f1 == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("pharaoh format") {
  const auto a = parse_pharaoh("0-0 1-2 3-1");
  CHECK(a.pairs.size() == 3);
  CHECK(a.pairs.count({1, 2}) == 1);
  CHECK(to_pharaoh(a) == "0-0 1-2 3-1");
  CHECK_THROWS_AS(parse_pharaoh("1-"), DataError);
  CHECK_THROWS_AS(parse_pharaoh("ab"), DataError);
  CHECK(parse_pharaoh("").pairs.empty());
}
