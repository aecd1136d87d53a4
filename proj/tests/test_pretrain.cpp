// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "modlm/pretrain.hpp"

using namespace modlm;
using namespace modlm::pretrain;

namespace {

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.vocab_size = 64;
  c.hidden = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 16;
  c.adapter_bottleneck = 4;
  c.max_positions = 20;
  c.include_pooler = false;
  c.languages = {"la", "lb"};
  return c;
}

tok::Vocabulary tiny_vocab(int pieces = 59) {
  const std::string m = "\xE2\x96\x81";
  std::vector<tok::Piece> ps;
  ps.push_back({m, -2.0});
  for (int i = 0; i < pieces - 1; ++i) {
    std::string surf;
    int x = i;
    do {
      surf.push_back(static_cast<char>('a' + x % 26));
      x /= 26;
    } while (x > 0);
    ps.push_back({surf, -3.0 - 0.01 * i});
  }
  return tok::Vocabulary::make(ps, false);  // 5 specials + 59 pieces = 64
}

// simple repeating-pattern sampler over two languages
SequenceSampler pattern_sampler(const tok::Vocabulary& vocab) {
  return [&vocab](Rng& rng) {
    Sequence seq;
    seq.lang = rng.uniform() < 0.5 ? "la" : "lb";
    const std::int32_t base = vocab.num_specials();
    const auto offset = static_cast<std::int32_t>(rng.uniform_int(4));
    for (int t = 0; t < 12; ++t)
      seq.ids.push_back(base + (t * 2 + offset) % 40);
    seq.mask.assign(seq.ids.size(), 1);
    return seq;
  };
}

}  // namespace

TEST_CASE("lr schedule: warmup to peak, linear decay, midpoint") {
  TrainPlan plan;
  plan.peak_lr = 7e-4;
  plan.warmup_steps = 100;
  plan.total_steps = 1000;
  CHECK(lr_at(0, plan) == 0.0);
  CHECK(lr_at(100, plan) == doctest::Approx(7e-4).epsilon(1e-15));
  CHECK(lr_at(1000, plan) == doctest::Approx(0.0).epsilon(1e-18));
  // halfway between warmup end and total: exactly peak/2
  CHECK(lr_at(550, plan) == doctest::Approx(3.5e-4).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at(1001, plan), ConfigError);
}

TEST_CASE("mask_tokens policy") {
  const auto vocab = tiny_vocab();
  TrainPlan plan;
  Rng rng(42);
  std::vector<std::int32_t> seq;
  std::vector<std::uint8_t> mask;
  for (int i = 0; i < 16; ++i) {
    seq.push_back(vocab.num_specials() + i);
    mask.push_back(1);
  }
  SUBCASE("mask_prob 0 changes nothing, all labels ignored") {
    plan.mask_prob = 0.0;
    const auto out = mask_tokens(seq, mask, vocab.num_specials(), 64,
                                 vocab.mask_id(), plan, rng);
    CHECK(out.inputs == seq);
    for (auto l : out.labels) CHECK(l == -1);
  }
  SUBCASE("mask_prob 1 with split (1,0,0) masks every eligible position") {
    plan.mask_prob = 1.0;
    plan.mask_split_mask = 1.0;
    plan.mask_split_random = 0.0;
    plan.mask_split_keep = 0.0;
    const auto out = mask_tokens(seq, mask, vocab.num_specials(), 64,
                                 vocab.mask_id(), plan, rng);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      CHECK(out.inputs[i] == vocab.mask_id());
      CHECK(out.labels[i] == seq[i]);
    }
  }
  SUBCASE("specials and padding are never selected") {
    plan.mask_prob = 1.0;
    std::vector<std::int32_t> s = {vocab.bos_id(), 10, 11, vocab.pad_id()};
    std::vector<std::uint8_t> am = {1, 1, 1, 0};
    const auto out =
        mask_tokens(s, am, vocab.num_specials(), 64, vocab.mask_id(), plan,
                    rng);
    CHECK(out.labels[0] == -1);
    CHECK(out.labels[3] == -1);
    CHECK(out.inputs[0] == vocab.bos_id());
    CHECK(out.inputs[3] == vocab.pad_id());
  }
  SUBCASE("Monte-Carlo: selection and split fractions match the policy") {
    plan.mask_prob = 0.15;
    const int n = 100000;
    std::vector<std::int32_t> big(n);
    std::vector<std::uint8_t> bigmask(n, 1);
    for (int i = 0; i < n; ++i)
      big[static_cast<std::size_t>(i)] =
          vocab.num_specials() + i % 40;
    Rng mc(7);
    const auto out = mask_tokens(big, bigmask, vocab.num_specials(), 64,
                                 vocab.mask_id(), plan, mc);
    std::int64_t selected = 0, masked = 0, kept = 0, random_repl = 0;
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (out.labels[idx] < 0) continue;
      ++selected;
      if (out.inputs[idx] == vocab.mask_id()) ++masked;
      else if (out.inputs[idx] == big[idx]) ++kept;
      else ++random_repl;
    }
    const double sel_frac = static_cast<double>(selected) / n;
    CHECK(std::abs(sel_frac - 0.15) < 0.005);
    const double den = static_cast<double>(selected);
    CHECK(std::abs(masked / den - 0.8) < 0.01);
    CHECK(std::abs(random_repl / den - 0.1) < 0.01);
    CHECK(std::abs(kept / den - 0.1) < 0.01);
  }
}

TEST_CASE("validation perplexity") {
  const auto vocab = tiny_vocab();
  auto config = tiny_config();
  auto params = model::build_model(config, 5);
  TrainPlan plan;
  std::vector<Sequence> validation;
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    Sequence s;
    s.lang = i % 2 ? "la" : "lb";
    for (int t = 0; t < 10; ++t)
      s.ids.push_back(vocab.num_specials() +
                      static_cast<std::int32_t>(rng.uniform_int(40)));
    s.mask.assign(s.ids.size(), 1);
    validation.push_back(std::move(s));
  }
  SUBCASE("uniform predictor scores exactly V") {
    params.at("emb.word").fill(0.0);  // kills the tied projection
    params.at("mlm.bias").fill(0.0);
    const double ppl = validation_perplexity(params, vocab, validation, 1,
                                             plan);
    CHECK(std::abs(ppl - 64.0) < 1e-9 * 64.0);
  }
  SUBCASE("fixed mask seed pairs the masked positions") {
    const double a = validation_perplexity(params, vocab, validation, 9, plan);
    const double b = validation_perplexity(params, vocab, validation, 9, plan);
    CHECK(a == b);
  }
  SUBCASE("empty validation set is degenerate") {
    CHECK_THROWS_AS(validation_perplexity(params, vocab, {}, 1, plan),
                    DegenerateInput);
  }
}

TEST_CASE("train: determinism, freezing, zero steps") {
  const auto vocab = tiny_vocab();
  const auto config = tiny_config();
  const auto sampler = pattern_sampler(vocab);
  TrainPlan plan;
  plan.total_steps = 8;
  plan.warmup_steps = 2;
  plan.batch_size = 2;
  plan.peak_lr = 1e-3;
  plan.freeze_mode = model::FreezeMode::AdaptPretrainV2;
  plan.seed = 123;

  SUBCASE("0 steps leaves the parameters unchanged") {
    auto params = model::build_model(config, 5);
    const auto before = params;
    TrainPlan p0 = plan;
    p0.total_steps = 0;
    p0.warmup_steps = 0;
    train(params, vocab, sampler, p0);
    for (const auto& [name, t] : before.tensors)
      CHECK(t.bitwise_equal(params.at(name)));
  }
  SUBCASE("identical seeds give identical loss curves") {
    auto p1 = model::build_model(config, 5);
    auto p2 = model::build_model(config, 5);
    const auto r1 = train(p1, vocab, sampler, plan);
    const auto r2 = train(p2, vocab, sampler, plan);
    REQUIRE(r1.curve.size() == r2.curve.size());
    for (std::size_t i = 0; i < r1.curve.size(); ++i) {
      CHECK(r1.curve[i].loss == r2.curve[i].loss);
      CHECK(r1.curve[i].grad_norm == r2.curve[i].grad_norm);
    }
    for (const auto& [name, t] : p1.tensors)
      CHECK(t.bitwise_equal(p2.at(name)));
  }
  SUBCASE("frozen partitions stay bitwise constant") {
    auto params = model::build_model(config, 5);
    const auto before = params;
    train(params, vocab, sampler, plan);
    bool anything_changed = false;
    for (const auto& [name, t] : params.tensors) {
      const auto& pi = params.info.at(name);
      if (pi.partition == model::Partition::SharedBody) {
        CHECK(t.bitwise_equal(before.at(name)));
      } else {
        anything_changed =
            anything_changed || !t.bitwise_equal(before.at(name));
      }
    }
    CHECK(anything_changed);
  }
  SUBCASE("v1 trains adapters only") {
    auto params = model::build_model(config, 5);
    const auto before = params;
    TrainPlan v1 = plan;
    v1.freeze_mode = model::FreezeMode::AdaptPretrainV1;
    train(params, vocab, sampler, v1);
    for (const auto& [name, t] : params.tensors) {
      const auto& pi = params.info.at(name);
      if (pi.partition != model::Partition::Adapter)
        CHECK(t.bitwise_equal(before.at(name)));
    }
  }
}

TEST_CASE("loss decreases on a learnable synthetic stream") {
  const auto vocab = tiny_vocab();
  const auto config = tiny_config();
  const auto sampler = pattern_sampler(vocab);
  TrainPlan plan;
  plan.total_steps = 120;
  plan.warmup_steps = 10;
  plan.batch_size = 4;
  plan.peak_lr = 3e-3;
  plan.freeze_mode = model::FreezeMode::Finetune;  // everything but adapters
  plan.seed = 321;
  auto params = model::build_model(config, 5);
  const auto result = train(params, vocab, sampler, plan);
  REQUIRE(result.curve.size() == 120);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 20; ++i) early += result.curve[static_cast<std::size_t>(i)].loss;
  for (int i = 100; i < 120; ++i) late += result.curve[static_cast<std::size_t>(i)].loss;
  CHECK(late < early);
  // windowed smoke property: loss decreases over most 30-step windows
  int decreasing = 0, windows = 0;
  for (std::size_t s = 0; s + 30 < result.curve.size(); s += 10) {
    ++windows;
    if (result.curve[s + 30].loss < result.curve[s].loss) ++decreasing;
  }
  CHECK(decreasing * 10 >= windows * 6);
}

TEST_CASE("format_pm matches the reporting style") {
  CHECK(format_pm(2.95, 0.13) == "2.95\xC2\xB1.13");
  CHECK(format_pm(1.82, 0.02) == "1.82\xC2\xB1.02");
  CHECK(format_pm(10.0, 1.5) == "10.00\xC2\xB1"
                                "1.50");
}

TEST_CASE("init_experiment: copy from converged adapter beats random at step 0") {
  const auto vocab = tiny_vocab();
  const auto config = tiny_config();
  const auto sampler = pattern_sampler(vocab);

  // converge the la adapter a little
  auto base = model::build_model(config, 5);
  TrainPlan pretrain_plan;
  pretrain_plan.total_steps = 150;
  pretrain_plan.warmup_steps = 10;
  pretrain_plan.batch_size = 4;
  pretrain_plan.peak_lr = 3e-3;
  pretrain_plan.freeze_mode = model::FreezeMode::AdaptPretrainV2;
  pretrain_plan.seed = 11;
  train(base, vocab, sampler, pretrain_plan);

  std::vector<Sequence> validation;
  Rng vr(77);
  for (int i = 0; i < 8; ++i) {
    auto s = sampler(vr);
    s.lang = "lb";
    validation.push_back(std::move(s));
  }

  TrainPlan plan = pretrain_plan;
  plan.total_steps = 10;
  const auto result = init_experiment(
      base, vocab, "lb", {{"copy(la)", {model::AdapterInit::Kind::Copy, {"la"}, 0}}},
      /*random_runs=*/3, /*random_seed_base=*/900, /*steps=*/10, plan, sampler,
      validation, /*mask_seed=*/55);

  REQUIRE(result.rows.size() == 4);
  const double copy_step0 = result.rows[0].ppl_step0;
  for (int r = 1; r <= 3; ++r)
    CHECK(copy_step0 < result.rows[static_cast<std::size_t>(r)].ppl_step0);
  CHECK(result.random_runs == 3);
  // sigma equals the sample standard deviation of the three runs
  double mean = 0.0;
  for (int r = 1; r <= 3; ++r)
    mean += result.rows[static_cast<std::size_t>(r)].ppl_step0;
  mean /= 3.0;
  double var = 0.0;
  for (int r = 1; r <= 3; ++r) {
    const double d = result.rows[static_cast<std::size_t>(r)].ppl_step0 - mean;
    var += d * d;
  }
  const double sd = std::sqrt(var / 2.0);
  CHECK(result.random_step0_sd == doctest::Approx(sd).epsilon(1e-12));
  CHECK(result.random_step0_mean == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("average of W and -W behaves as the zero adapter at step 0") {
  const auto vocab = tiny_vocab();
  auto config = tiny_config();
  config.languages = {"la", "lb", "lc"};
  auto base = model::build_model(config, 5);
  // lb = -la
  for (auto& [name, t] : base.tensors) {
    const auto pos = name.find(".adapter.lb.");
    if (pos == std::string::npos) continue;
    std::string src = name;
    src.replace(pos, 12, ".adapter.la.");
    const auto& s = base.at(src);
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = -s.data[i];
  }
  model::adapter_init(base, "lc",
                      {model::AdapterInit::Kind::Average, {"la", "lb"}, 0});
  // zero adapter: the modular forward equals the shared-body output
  const std::vector<std::int32_t> ids = {6, 9, 14, 30};
  const std::vector<std::uint8_t> mask(4, 1);
  model::ForwardCache cache;
  model::forward(base, ids, mask, "lc", &cache);
  const auto& last = cache.layers.back();
  for (std::size_t i = 0; i < last.layer_out.data.size(); ++i)
    CHECK(last.layer_out.data[i] == last.ln2_out.data[i]);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const auto vocab = tiny_vocab();
  const auto config = tiny_config();
  auto params = model::build_model(config, 5);
  params.at("mlm.bias").fill(std::nan(""));
  TrainPlan plan;
  plan.total_steps = 1;
  plan.warmup_steps = 0;
  plan.batch_size = 1;
  plan.freeze_mode = model::FreezeMode::AdaptPretrainV2;
  const auto sampler = pattern_sampler(vocab);
  CHECK_THROWS_AS(train(params, vocab, sampler, plan), DataError);
}
