#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "npad/errors.hpp"
#include "npad/model.hpp"
#include "npad/model_io.hpp"
#include "support.hpp"

using namespace npad;
using npad::testing::random_model;
using npad::testing::TempDir;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarGru {
  double wz, wr, wh, uz, ur, uh, bz, br, bh;
  double step(double x, double h) const {
    const double z = sig(wz * x + uz * h + bz);
    const double r = sig(wr * x + ur * h + br);
    const double c = std::tanh(wh * x + uh * r * h + bh);
    return (1 - z) * h + z * c;
  }
  void install(GruWeights& g) const {
    g.wz(0, 0) = wz;
    g.wr(0, 0) = wr;
    g.wh(0, 0) = wh;
    g.uz(0, 0) = uz;
    g.ur(0, 0) = ur;
    g.uh(0, 0) = uh;
    g.bias_z(0, 0) = bz;
    g.bias_r(0, 0) = br;
    g.bias_h(0, 0) = bh;
  }
};

}  // namespace

TEST(Model, ParameterShapesAndCount) {
  const ModelDims dims{7, 6, 3, 4};
  const ModelParams p = ModelParams::zeros(dims);
  EXPECT_NO_THROW(p.validate());
  const std::size_t H = 4, E = 3, A = 8;
  const std::size_t gru_enc = 3 * (H * E + H * H + H);
  const std::size_t gru_dec = 3 * (H * (E + A) + H * H + H);
  const std::size_t expected = 7 * E + 6 * E + 2 * gru_enc + H * A + H + H * H + H * A + H + H +
                               gru_dec + 6 * H + 6 * A + 6;
  EXPECT_EQ(p.parameter_count(), expected);
}

TEST(Model, RandomInitRangeAndZeroBiases) {
  RngStream rng(3);
  const ModelParams p = ModelParams::random_uniform({6, 6, 4, 5}, rng);
  p.for_each_tensor([](const std::string& name, const Mat& m) {
    for (double x : m.flat()) {
      if (is_bias_tensor(name)) {
        EXPECT_EQ(x, 0.0) << name;
      } else {
        EXPECT_LE(std::abs(x), 0.08) << name;
      }
    }
  });
}

TEST(Model, ValidateRejectsBadShapesAndNonFinite) {
  ModelParams p = ModelParams::zeros({5, 5, 2, 3});
  p.att_key = Mat(3, 5);
  EXPECT_THROW(p.validate(), ContractViolation);
  p = ModelParams::zeros({5, 5, 2, 3});
  p.out_bias(1, 0) = std::nan("");
  EXPECT_THROW(p.validate(), ContractViolation);
}

TEST(Encode, SingleTokenGivesOneAnnotation) {
  const ModelParams p = random_model({6, 5, 3, 4}, 1);
  const EncodedSource enc = encode(p, {4});
  ASSERT_EQ(enc.source_len(), 1u);
  EXPECT_EQ(enc.annotations[0].dim(), 8u);
}

TEST(Encode, ZeroEncoderGivesZeroAnnotations) {
  ModelParams p = random_model({6, 5, 3, 4}, 2);
  p.enc_fwd = GruWeights::zeros(3, 4);
  p.enc_bwd = GruWeights::zeros(3, 4);
  for (const Vec& a : encode(p, {3, 4, 5}).annotations) {
    for (double x : a) EXPECT_EQ(x, 0.0);
  }
}

TEST(Encode, UnknownTokenThrows) {
  const ModelParams p = random_model({6, 5, 3, 4}, 2);
  EXPECT_THROW(encode(p, {3, 6}), VocabularyError);
  EXPECT_THROW(encode(p, {}), ContractViolation);
}

TEST(Encode, ScalarGruMatchesHandRecurrence) {
  ModelParams p = ModelParams::zeros({6, 4, 1, 1});
  const double emb[6] = {0, 0, 0, 0.7, -1.2, 0.4};
  for (std::size_t i = 0; i < 6; ++i) p.src_embed(i, 0) = emb[i];
  const ScalarGru fwd{0.5, -0.3, 1.1, 0.8, 0.2, -0.6, 0.1, -0.2, 0.05};
  const ScalarGru bwd{-0.4, 0.9, 0.7, -0.5, 0.3, 1.2, -0.1, 0.15, -0.25};
  fwd.install(p.enc_fwd);
  bwd.install(p.enc_bwd);

  const TokenSeq src{3, 4, 5};
  double hf[3], hb[3];
  double h = 0.0;
  for (int i = 0; i < 3; ++i) hf[i] = h = fwd.step(emb[src[i]], h);
  h = 0.0;
  for (int i = 2; i >= 0; --i) hb[i] = h = bwd.step(emb[src[i]], h);

  const EncodedSource enc = encode(p, src);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(enc.annotations[i][0], hf[i], 1e-15);
    EXPECT_NEAR(enc.annotations[i][1], hb[i], 1e-15);
  }
}

TEST(Attention, SinglePositionReturnsAnnotation) {
  const ModelParams p = random_model({6, 5, 3, 4}, 4);
  const EncodedSource enc = encode(p, {5});
  const AttentionResult r = attention_context(p, Vec{0.3, -0.2, 0.9, 0.1}, enc);
  ASSERT_EQ(r.weights.dim(), 1u);
  EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
  EXPECT_EQ(r.context, enc.annotations[0]);
}

TEST(Attention, IdenticalAnnotationsGiveThatAnnotation) {
  const ModelParams p = random_model({6, 5, 3, 2}, 5);
  const Vec a{0.1, -0.4, 0.25, 0.6};
  const EncodedSource enc = from_annotations(p, {a, a, a});
  const AttentionResult r = attention_context(p, Vec{0.5, -1.0}, enc);
  for (std::size_t k = 0; k < a.dim(); ++k) EXPECT_NEAR(r.context[k], a[k], 1e-15);
  double total = 0.0;
  for (double w : r.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Attention, HandSetScoresGiveThreeToOne) {
  // One hidden unit: e_i = v * tanh(key_i). With tanh(key_0) = 1/2, key_1 = 0
  // and v = 2 ln 3 the scores are [ln 3, 0], so alpha = [3/4, 1/4].
  ModelParams p = ModelParams::zeros({4, 4, 1, 1});
  p.att_key(0, 0) = 1.0;
  p.att_score(0, 0) = 2.0 * std::log(3.0);
  const EncodedSource enc = from_annotations(p, {Vec{std::atanh(0.5), 2.0}, Vec{0.0, -2.0}});
  const AttentionResult r = attention_context(p, Vec{0.7}, enc);
  EXPECT_NEAR(r.weights[0], 0.75, 1e-12);
  EXPECT_NEAR(r.weights[1], 0.25, 1e-12);
  EXPECT_NEAR(r.context[1], 0.75 * 2.0 + 0.25 * -2.0, 1e-12);
}

TEST(Attention, WeightsFormDistribution) {
  const ModelParams p = random_model({8, 6, 3, 4}, 6, 2.0);
  const EncodedSource enc = encode(p, {3, 4, 5, 6, 7});
  RngStream rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec q = gaussian_vec(rng, 4, 2.0);
    const AttentionResult r = attention_context(p, q, enc);
    double total = 0.0;
    for (double w : r.weights) {
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(DecoderStep, ZeroNoiseIsDeterministic) {
  const ModelParams p = random_model({6, 6, 3, 4}, 7);
  const EncodedSource enc = encode(p, {3, 5, 4});
  const DecoderState s0 = initial_state(p, enc);
  const StepResult a = decoder_step(p, s0, Vocab::kBos, enc, Vec(4));
  const StepResult b = decoder_step(p, s0, Vocab::kBos, enc, Vec(4));
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.log_probs, b.log_probs);
  EXPECT_EQ(a.state.t, s0.t + 1);
}

TEST(DecoderStep, ZeroReadoutIsUniform) {
  const ModelParams p = npad::testing::uniform_model({6, 7, 3, 4});
  const EncodedSource enc = encode(p, {3, 4});
  const StepResult r = decoder_step(p, initial_state(p, enc), Vocab::kBos, enc, Vec(4));
  for (double lp : r.log_probs) EXPECT_NEAR(lp, -std::log(7.0), 1e-15);
}

TEST(DecoderStep, DimensionMismatchThrows) {
  const ModelParams p = random_model({6, 6, 3, 4}, 7);
  const EncodedSource enc = encode(p, {3});
  EXPECT_THROW(decoder_step(p, initial_state(p, enc), Vocab::kBos, enc, Vec(3)), ContractViolation);
  EXPECT_THROW(decoder_step(p, DecoderState{Vec(2), 0}, Vocab::kBos, enc, Vec(4)),
               ContractViolation);
}

TEST(DecoderStep, ScalarModelMatchesHandComputation) {
  // d_emb = d_hid = 1, one source token, target vocabulary of 4.
  ModelParams p = random_model({4, 4, 1, 1}, 8, 0.9);
  const TokenSeq src{3};
  const EncodedSource enc = encode(p, src);
  const double a0 = enc.annotations[0][0], a1 = enc.annotations[0][1];

  const double h0 = std::tanh(p.init_w(0, 0) * a0 + p.init_w(0, 1) * a1 + p.init_bias(0, 0));
  const double noise = 0.37;
  const double q = h0 + noise;
  // single source position: context is the annotation
  const double x[3] = {p.tgt_embed(Vocab::kBos, 0), a0, a1};
  auto gate = [&](const Mat& w, const Mat& u, const Mat& b, double hh) {
    return w(0, 0) * x[0] + w(0, 1) * x[1] + w(0, 2) * x[2] + u(0, 0) * hh + b(0, 0);
  };
  const double z = sig(gate(p.dec.wz, p.dec.uz, p.dec.bias_z, q));
  const double r = sig(gate(p.dec.wr, p.dec.ur, p.dec.bias_r, q));
  const double c = std::tanh(gate(p.dec.wh, p.dec.uh, p.dec.bias_h, r * q));
  const double h1 = (1 - z) * q + z * c;
  double logits[4], mx = -1e300;
  for (int j = 0; j < 4; ++j) {
    logits[j] = p.out_hidden(j, 0) * h1 + p.out_context(j, 0) * a0 + p.out_context(j, 1) * a1 +
                p.out_bias(j, 0);
    mx = std::max(mx, logits[j]);
  }
  double z_sum = 0.0;
  for (double l : logits) z_sum += std::exp(l - mx);

  const StepResult step = decoder_step(p, initial_state(p, enc), Vocab::kBos, enc, Vec{noise});
  EXPECT_NEAR(step.state.h[0], h1, 1e-14);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(step.log_probs[j], logits[j] - mx - std::log(z_sum), 1e-13);
  }
}

TEST(ScoreSequence, UniformModelAnalytic) {
  const ModelParams p = npad::testing::uniform_model({5, 4, 2, 3});
  EXPECT_NEAR(score_sequence(p, TokenSeq{3, 4}, TokenSeq{3, 3, Vocab::kEos}), -3.0 * std::log(4.0),
              1e-12);
}

TEST(ScoreSequence, EqualsSumOfStepReplay) {
  const ModelParams p = random_model({7, 6, 3, 4}, 9);
  const EncodedSource enc = encode(p, {3, 6, 4});
  const TokenSeq target{5, 3, 4, Vocab::kEos};
  DecoderState s = initial_state(p, enc);
  TokenId prev = Vocab::kBos;
  double total = 0.0;
  for (TokenId tok : target) {
    const StepResult r = decoder_step(p, s, prev, enc, Vec(4));
    total += r.log_probs[static_cast<std::size_t>(tok)];
    s = r.state;
    prev = tok;
  }
  EXPECT_EQ(score_sequence(p, enc, target), total);
  EXPECT_EQ(score_sequence(p, TokenSeq{3, 6, 4}, target), total);
}

TEST(ScoreSequence, RequiresTrailingEos) {
  const ModelParams p = random_model({5, 5, 2, 3}, 1);
  EXPECT_THROW(score_sequence(p, TokenSeq{3}, TokenSeq{3, 4}), ContractViolation);
  EXPECT_THROW(score_sequence(p, TokenSeq{3}, TokenSeq{9, Vocab::kEos}), VocabularyError);
}

TEST(ScoreSequence, EnumeratedMassMatchesTruncatedEvent) {
  // Over |V| = 4 and lengths <= L, the EOS-terminated sequences partition the
  // event "EOS within L steps", whose mass is 1 - P(no EOS in L steps).
  const ModelParams p = random_model({5, 4, 2, 3}, 10, 1.5);
  const EncodedSource enc = encode(p, {3, 4});
  const int L = 4;
  double mass = 0.0;
  double no_eos = 0.0;
  std::vector<TokenSeq> frontier{{}};
  for (int len = 1; len <= L; ++len) {
    std::vector<TokenSeq> next;
    for (const auto& prefix : frontier) {
      TokenSeq done = prefix;
      done.push_back(Vocab::kEos);
      mass += std::exp(score_sequence(p, enc, done));
      for (TokenId j : {0, 1, 3}) {
        TokenSeq ext = prefix;
        ext.push_back(j);
        next.push_back(ext);
      }
    }
    frontier = std::move(next);
  }
  for (const auto& prefix : frontier) {
    DecoderState s = initial_state(p, enc);
    TokenId prev = Vocab::kBos;
    double lp = 0.0;
    for (TokenId tok : prefix) {
      const StepResult r = decoder_step(p, s, prev, enc, Vec(3));
      lp += r.log_probs[static_cast<std::size_t>(tok)];
      s = r.state;
      prev = tok;
    }
    no_eos += std::exp(lp);
  }
  EXPECT_NEAR(mass + no_eos, 1.0, 1e-9);
}

TEST(ModelIo, RoundTripIsExact) {
  const ModelParams p = random_model({9, 7, 3, 5}, 11);
  std::stringstream buf;
  write_model(buf, p);
  EXPECT_EQ(read_model(buf), p);
}

TEST(ModelIo, HeaderLayout) {
  const ModelParams p = random_model({9, 7, 3, 5}, 11);
  std::stringstream buf;
  write_model(buf, p);
  const std::string bytes = buf.str();
  ASSERT_GE(bytes.size(), 48u);
  EXPECT_EQ(bytes.substr(0, 8), "NPADMODL");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  EXPECT_EQ(version, 1u);
  std::uint64_t dims[4];
  std::memcpy(dims, bytes.data() + 12, 32);
  EXPECT_EQ(dims[0], 9u);
  EXPECT_EQ(dims[1], 7u);
  EXPECT_EQ(dims[2], 3u);
  EXPECT_EQ(dims[3], 5u);
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 44, 4);
  std::size_t tensors = 0;
  p.for_each_tensor([&](const std::string&, const Mat&) { ++tensors; });
  EXPECT_EQ(count, tensors);
  std::uint32_t name_len = 0;
  std::memcpy(&name_len, bytes.data() + 48, 4);
  EXPECT_EQ(bytes.substr(52, name_len), "src_embed");
}

TEST(ModelIo, RejectsCorruptContainers) {
  const ModelParams p = random_model({5, 5, 2, 3}, 12);
  std::stringstream buf;
  write_model(buf, p);
  const std::string good = buf.str();

  auto read = [](std::string bytes) {
    std::stringstream in(std::move(bytes));
    return read_model(in);
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(read(bad), FormatError);
  bad = good;
  bad[8] = 2;
  EXPECT_THROW(read(bad), FormatError);
  EXPECT_THROW(read(good.substr(0, good.size() - 3)), FormatError);
  EXPECT_THROW(read(good.substr(0, 30)), FormatError);
  bad = good;
  bad[52] = 'x';  // rename the first tensor
  EXPECT_THROW(read(bad), FormatError);
}

TEST(ModelIo, SaveIsAtomicAndLoadable) {
  TempDir dir("modelio");
  const ModelParams p = random_model({5, 6, 2, 3}, 13);
  save_model(dir / "m.bin", p);
  EXPECT_EQ(load_model(dir / "m.bin"), p);
  EXPECT_FALSE(std::filesystem::exists(dir / "m.bin.tmp"));
  EXPECT_THROW(load_model(dir / "nope.bin"), FormatError);

  EXPECT_THROW(write_file_atomically(dir / "partial.txt",
                                     [](std::ostream& out) {
                                       out << "half";
                                       throw std::runtime_error("writer failed");
                                     }),
               std::runtime_error);
  EXPECT_FALSE(std::filesystem::exists(dir / "partial.txt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "partial.txt.tmp"));
}
