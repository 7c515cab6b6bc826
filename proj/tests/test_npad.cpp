#include <gtest/gtest.h>

#include <cmath>

#include "npad/errors.hpp"
#include "npad/npad.hpp"
#include "support.hpp"

using namespace npad;
using npad::testing::garden_path_model;
using npad::testing::kTokB;
using npad::testing::random_model;
using npad::testing::random_source;

namespace {

NpadConfig config(std::size_t chains, double sigma0, InnerDecoder inner = {},
                  std::uint64_t seed = 42) {
  NpadConfig cfg;
  cfg.chains = chains;
  cfg.schedule.sigma0 = sigma0;
  cfg.inner = inner;
  cfg.base_seed = seed;
  cfg.limits = DecodeLimits{8};
  return cfg;
}

}  // namespace

TEST(NoiseSchedule, InverseT) {
  EXPECT_DOUBLE_EQ(noise_sigma({0.3, ScheduleRule::inverse_t}, 1), 0.3);
  EXPECT_DOUBLE_EQ(noise_sigma({0.3, ScheduleRule::inverse_t}, 2), 0.15);
  for (int t = 1; t < 20; ++t) {
    EXPECT_EQ(noise_sigma({0.0, ScheduleRule::inverse_t}, t), 0.0);
    EXPECT_GT(noise_sigma({0.5, ScheduleRule::inverse_t}, t),
              noise_sigma({0.5, ScheduleRule::inverse_t}, t + 1));
  }
  EXPECT_THROW(noise_sigma({0.3, ScheduleRule::inverse_t}, 0), ContractViolation);
}

TEST(NoiseSource, ScheduledDrawsHaveScheduledSpread) {
  NoiseSource src = NoiseSource::scheduled(RngStream(5), {0.6, ScheduleRule::inverse_t});
  for (int t : {1, 3}) {
    const Vec v = src.next(t, 60000);
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double sd = std::sqrt(ss / static_cast<double>(v.dim()));
    EXPECT_NEAR(sd, 0.6 / t, 0.01 * 0.6 / t);
  }
}

TEST(Npad, ConfigValidation) {
  NpadConfig cfg = config(0, 0.3);
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = config(2, -0.1);
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = config(2, 0.1, {InnerKind::beam, 0});
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = config(2, 0.1);
  cfg.limits.max_len = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  EXPECT_NO_THROW(config(3, 0.1).validate());
  EXPECT_THROW(parse_inner_kind("viterbi"), ConfigError);
}

TEST(Npad, ZeroChainMatchesPlainGreedy) {
  const ModelParams p = random_model({7, 7, 3, 4}, 8, 1.0);
  const EncodedSource enc = encode(p, {3, 5, 4});
  const NpadConfig cfg = config(10, 0.5);
  const ChainResult c0 = run_chain(p, enc, cfg, 0);
  NoiseSource silent = NoiseSource::silent();
  const Hypothesis g = greedy_decode(p, enc, silent, cfg.limits);
  EXPECT_EQ(c0.hypothesis.tokens, g.tokens);
  EXPECT_EQ(c0.sigma0_effective, 0.0);
  EXPECT_NEAR(c0.noisy_logp, c0.rescored_logp, 1e-9);
  const ChainResult c1 = run_chain(p, enc, cfg, 1);
  EXPECT_EQ(c1.sigma0_effective, 0.5);
}

TEST(Npad, ChainIsDeterministic) {
  const ModelParams p = random_model({7, 7, 3, 4}, 8, 1.0);
  const EncodedSource enc = encode(p, {3, 5, 4});
  const NpadConfig cfg = config(10, 0.5);
  for (std::size_t m = 0; m < 10; ++m) EXPECT_EQ(run_chain(p, enc, cfg, m), run_chain(p, enc, cfg, m));
  EXPECT_THROW(run_chain(p, enc, cfg, 10), ContractViolation);
}

TEST(Npad, SingleSilentChainIsGreedy) {
  const ModelParams p = random_model({7, 7, 3, 4}, 12, 1.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const EncodedSource enc = encode(p, random_source(7, 4, s));
    NpadConfig cfg = config(1, 0.0);
    cfg.include_zero_chain = false;
    const NpadResult r = npad_decode(p, enc, cfg);
    NoiseSource silent = NoiseSource::silent();
    const Hypothesis g = greedy_decode(p, enc, silent, cfg.limits);
    EXPECT_EQ(r.best.hypothesis.tokens, g.tokens);
    EXPECT_EQ(r.best.rescored_logp, r.best.noisy_logp);
  }
}

TEST(Npad, EscapesGardenPathWithNoise) {
  const ModelParams p = garden_path_model();
  const EncodedSource enc = encode(p, {3});
  NoiseSource silent = NoiseSource::silent();
  const Hypothesis g = greedy_decode(p, enc, silent, DecodeLimits{4});
  const Hypothesis exact = exact_decode(p, enc, DecodeLimits{3});
  ASSERT_NE(g.tokens, exact.tokens);

  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    NpadConfig cfg = config(50, 0.3, {}, seed);
    cfg.limits = DecodeLimits{4};
    const NpadResult r = npad_decode(p, enc, cfg);
    bool escaped = false;
    for (std::size_t m = 1; m < r.chains.size(); ++m) {
      escaped = escaped || r.chains[m].rescored_logp > g.logp + 1e-9;
    }
    EXPECT_TRUE(escaped) << "seed " << seed;
    EXPECT_EQ(r.best.hypothesis.tokens, exact.tokens);
    EXPECT_EQ(r.best.hypothesis.tokens[0], kTokB);
  }
}

TEST(Npad, QualityGuaranteeAgainstInnerDecoder) {
  const ModelParams p = random_model({8, 8, 3, 5}, 14, 1.2);
  for (std::uint64_t s = 0; s < 25; ++s) {
    const EncodedSource enc = encode(p, random_source(8, 5, s));
    for (InnerDecoder inner : {InnerDecoder{InnerKind::greedy, 1}, InnerDecoder{InnerKind::beam, 3}}) {
      const NpadConfig cfg = config(6, 0.8, inner, s);
      const NpadResult r = npad_decode(p, enc, cfg);
      NoiseSource silent = NoiseSource::silent();
      const Hypothesis plain = inner.kind == InnerKind::greedy
                                   ? greedy_decode(p, enc, silent, cfg.limits)
                                   : beam_decode(p, enc, 3, silent, cfg.limits).best;
      EXPECT_GE(r.best.rescored_logp, rescore(p, enc, plain.tokens));
    }
  }
}

TEST(Npad, NestedSeedsGiveMonotoneBest) {
  const ModelParams p = random_model({8, 8, 3, 5}, 15, 1.2);
  for (std::uint64_t s = 0; s < 15; ++s) {
    const EncodedSource enc = encode(p, random_source(8, 5, s));
    double prev = -1e300;
    std::vector<ChainResult> prev_chains;
    for (std::size_t m : {1u, 5u, 10u, 50u}) {
      const NpadResult r = npad_decode(p, enc, config(m, 0.5, {}, 99));
      EXPECT_GE(r.best.rescored_logp, prev);
      for (std::size_t i = 0; i < prev_chains.size(); ++i) EXPECT_EQ(r.chains[i], prev_chains[i]);
      prev = r.best.rescored_logp;
      prev_chains = r.chains;
    }
  }
}

TEST(Npad, ParallelEqualsSequential) {
  const ModelParams p = random_model({8, 8, 3, 5}, 16, 1.2);
  const EncodedSource enc = encode(p, {3, 4, 5, 6});
  for (InnerDecoder inner : {InnerDecoder{InnerKind::greedy, 1}, InnerDecoder{InnerKind::beam, 2},
                             InnerDecoder{InnerKind::sampling, 1}}) {
    const NpadConfig cfg = config(12, 0.4, inner);
    const NpadResult a = npad_decode(p, enc, cfg, 1);
    const NpadResult b = npad_decode(p, enc, cfg, 4);
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(a.chains, b.chains);
  }
}

TEST(Npad, RescoresWithoutNoise) {
  const ModelParams p = random_model({8, 8, 3, 5}, 17, 1.2);
  const EncodedSource enc = encode(p, {3, 7});
  const NpadResult r = npad_decode(p, enc, config(20, 1.0, {InnerKind::beam, 2}));
  for (const auto& c : r.chains) {
    if (!c.hypothesis.complete) continue;
    EXPECT_NEAR(c.rescored_logp, score_sequence(p, enc, c.hypothesis.tokens), 1e-9);
  }
}

TEST(Npad, SelectionPrefersCompleteThenScoreThenIndex) {
  auto chain = [](std::size_t m, double logp, bool complete) {
    ChainResult c;
    c.chain_index = m;
    c.rescored_logp = logp;
    c.hypothesis.complete = complete;
    return c;
  };
  EXPECT_EQ(select_chain({chain(0, -3, true), chain(1, -2, true), chain(2, -2, true)}), 1u);
  EXPECT_EQ(select_chain({chain(0, -1, false), chain(1, -5, true)}), 1u);
  EXPECT_EQ(select_chain({chain(0, -4, false), chain(1, -2, false)}), 1u);
}

TEST(Npad, AllIncompleteReturnsFlaggedBest) {
  ModelParams p = random_model({5, 5, 2, 3}, 3, 0.5);
  p.out_hidden.fill(0.0);
  p.out_context.fill(0.0);
  p.out_bias.fill(0.0);
  p.out_bias(3, 0) = 30.0;
  NpadConfig cfg = config(4, 0.2);
  cfg.limits = DecodeLimits{3};
  const NpadResult r = npad_decode(p, encode(p, {3}), cfg);
  EXPECT_FALSE(r.best.hypothesis.complete);
  EXPECT_EQ(r.best.hypothesis.tokens, (TokenSeq{3, 3, 3}));
}

TEST(Npad, SamplingInnerWithSilentNoiseIsStochasticSampling) {
  const ModelParams p = random_model({8, 8, 3, 5}, 18, 1.2);
  const EncodedSource enc = encode(p, {3, 4});
  NpadConfig cfg = config(5, 0.0, {InnerKind::sampling, 1});
  cfg.include_zero_chain = false;
  const NpadResult r = npad_decode(p, enc, cfg);
  for (std::size_t m = 0; m < 5; ++m) {
    RngStream rng(derive_seed(chain_seed(cfg, m), 1));
    const Hypothesis h = sample_decode(p, enc, rng, cfg.limits);
    EXPECT_EQ(r.chains[m].hypothesis.tokens, h.tokens);
  }
}
