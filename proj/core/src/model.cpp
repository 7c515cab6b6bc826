#include "npad/model.hpp"

#include <cmath>

#include "cells.hpp"
#include "npad/errors.hpp"

namespace npad {

namespace {

Mat column(std::size_t n) { return Mat(n, 1); }

void require_token(TokenId token, std::size_t vocab_size, const char* which) {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size) {
    throw VocabularyError(std::string(which) + " token index " + std::to_string(token) +
                          " outside vocabulary of size " + std::to_string(vocab_size));
  }
}

void check_shape(const std::string& name, const Mat& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ContractViolation("tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                            "x" + std::to_string(cols));
  }
}

void check_gru(const std::string& prefix, const GruWeights& g, std::size_t in, std::size_t hid) {
  check_shape(prefix + ".wz", g.wz, hid, in);
  check_shape(prefix + ".wr", g.wr, hid, in);
  check_shape(prefix + ".wh", g.wh, hid, in);
  check_shape(prefix + ".uz", g.uz, hid, hid);
  check_shape(prefix + ".ur", g.ur, hid, hid);
  check_shape(prefix + ".uh", g.uh, hid, hid);
  check_shape(prefix + ".bias_z", g.bias_z, hid, 1);
  check_shape(prefix + ".bias_r", g.bias_r, hid, 1);
  check_shape(prefix + ".bias_h", g.bias_h, hid, 1);
}

}  // namespace

GruWeights GruWeights::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruWeights g;
  g.wz = g.wr = g.wh = Mat(hidden_dim, input_dim);
  g.uz = g.ur = g.uh = Mat(hidden_dim, hidden_dim);
  g.bias_z = g.bias_r = g.bias_h = column(hidden_dim);
  return g;
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  require(dims.src_vocab >= 3 && dims.tgt_vocab >= 3, "model: vocabularies need at least 3 symbols");
  require(dims.d_emb >= 1 && dims.d_hid >= 1, "model: d_emb and d_hid must be positive");
  const std::size_t E = dims.d_emb;
  const std::size_t H = dims.d_hid;
  const std::size_t A = dims.d_annotation();
  ModelParams p;
  p.dims = dims;
  p.src_embed = Mat(dims.src_vocab, E);
  p.tgt_embed = Mat(dims.tgt_vocab, E);
  p.enc_fwd = GruWeights::zeros(E, H);
  p.enc_bwd = GruWeights::zeros(E, H);
  p.init_w = Mat(H, A);
  p.init_bias = column(H);
  p.att_query = Mat(dims.d_att(), H);
  p.att_key = Mat(dims.d_att(), A);
  p.att_bias = column(dims.d_att());
  p.att_score = Mat(1, dims.d_att());
  p.dec = GruWeights::zeros(E + A, H);
  p.out_hidden = Mat(dims.tgt_vocab, H);
  p.out_context = Mat(dims.tgt_vocab, A);
  p.out_bias = column(dims.tgt_vocab);
  return p;
}

ModelParams ModelParams::random_uniform(const ModelDims& dims, RngStream& rng, double scale) {
  ModelParams p = zeros(dims);
  p.for_each_tensor([&](const std::string& name, Mat& m) {
    if (is_bias_tensor(name)) return;
    for (double& x : m.flat()) x = scale * (2.0 * rng.uniform() - 1.0);
  });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Mat& m) { n += m.size(); });
  return n;
}

void ModelParams::validate() const {
  const std::size_t E = dims.d_emb;
  const std::size_t H = dims.d_hid;
  const std::size_t A = dims.d_annotation();
  check_shape("src_embed", src_embed, dims.src_vocab, E);
  check_shape("tgt_embed", tgt_embed, dims.tgt_vocab, E);
  check_gru("enc_fwd", enc_fwd, E, H);
  check_gru("enc_bwd", enc_bwd, E, H);
  check_shape("init_w", init_w, H, A);
  check_shape("init_bias", init_bias, H, 1);
  check_shape("att_query", att_query, dims.d_att(), H);
  check_shape("att_key", att_key, dims.d_att(), A);
  check_shape("att_bias", att_bias, dims.d_att(), 1);
  check_shape("att_score", att_score, 1, dims.d_att());
  check_gru("dec", dec, E + A, H);
  check_shape("out_hidden", out_hidden, dims.tgt_vocab, H);
  check_shape("out_context", out_context, dims.tgt_vocab, A);
  check_shape("out_bias", out_bias, dims.tgt_vocab, 1);
  for_each_tensor([](const std::string& name, const Mat& m) {
    if (!m.all_finite()) throw ContractViolation("tensor " + name + " has non-finite entries");
  });
}

bool is_bias_tensor(const std::string& name) { return name.find("bias") != std::string::npos; }

namespace detail {

void gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev,
                 GruTrace& tr) {
  const std::size_t H = w.hidden_dim();
  tr.x = Vec(std::vector<double>(x.begin(), x.end()));
  tr.h_prev = Vec(std::vector<double>(h_prev.begin(), h_prev.end()));
  tr.z = Vec(H);
  tr.r = Vec(H);
  tr.rh = Vec(H);
  tr.cand = Vec(H);
  tr.h = Vec(H);

  for (std::size_t i = 0; i < H; ++i) {
    tr.z[i] = w.bias_z(i, 0);
    tr.r[i] = w.bias_r(i, 0);
    tr.cand[i] = w.bias_h(i, 0);
  }
  matvec_accumulate(w.wz, x, tr.z.span());
  matvec_accumulate(w.uz, h_prev, tr.z.span());
  matvec_accumulate(w.wr, x, tr.r.span());
  matvec_accumulate(w.ur, h_prev, tr.r.span());
  for (std::size_t i = 0; i < H; ++i) {
    tr.z[i] = sigmoid(tr.z[i]);
    tr.r[i] = sigmoid(tr.r[i]);
    tr.rh[i] = tr.r[i] * h_prev[i];
  }
  matvec_accumulate(w.wh, x, tr.cand.span());
  matvec_accumulate(w.uh, tr.rh.span(), tr.cand.span());
  for (std::size_t i = 0; i < H; ++i) {
    tr.cand[i] = std::tanh(tr.cand[i]);
    tr.h[i] = (1.0 - tr.z[i]) * h_prev[i] + tr.z[i] * tr.cand[i];
  }
}

void gru_backward(const GruWeights& w, const GruTrace& tr, std::span<const double> dh,
                  GruWeights& grad, std::span<double> dx, std::span<double> dh_prev) {
  const std::size_t H = w.hidden_dim();
  Vec dz_pre(H), dcand_pre(H), dr_pre(H), drh(H);
  for (std::size_t i = 0; i < H; ++i) {
    const double dz = dh[i] * (tr.cand[i] - tr.h_prev[i]);
    const double dcand = dh[i] * tr.z[i];
    dh_prev[i] += dh[i] * (1.0 - tr.z[i]);
    dz_pre[i] = dz * tr.z[i] * (1.0 - tr.z[i]);
    dcand_pre[i] = dcand * (1.0 - tr.cand[i] * tr.cand[i]);
  }

  // Candidate branch.
  outer_accumulate(grad.wh, dcand_pre.span(), tr.x.span());
  outer_accumulate(grad.uh, dcand_pre.span(), tr.rh.span());
  axpy(1.0, dcand_pre.span(), grad.bias_h.flat());
  matvec_transposed_accumulate(w.wh, dcand_pre.span(), dx);
  matvec_transposed_accumulate(w.uh, dcand_pre.span(), drh.span());
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] += drh[i] * tr.r[i];
    dr_pre[i] = drh[i] * tr.h_prev[i] * tr.r[i] * (1.0 - tr.r[i]);
  }

  // Reset gate.
  outer_accumulate(grad.wr, dr_pre.span(), tr.x.span());
  outer_accumulate(grad.ur, dr_pre.span(), tr.h_prev.span());
  axpy(1.0, dr_pre.span(), grad.bias_r.flat());
  matvec_transposed_accumulate(w.wr, dr_pre.span(), dx);
  matvec_transposed_accumulate(w.ur, dr_pre.span(), dh_prev);

  // Update gate.
  outer_accumulate(grad.wz, dz_pre.span(), tr.x.span());
  outer_accumulate(grad.uz, dz_pre.span(), tr.h_prev.span());
  axpy(1.0, dz_pre.span(), grad.bias_z.flat());
  matvec_transposed_accumulate(w.wz, dz_pre.span(), dx);
  matvec_transposed_accumulate(w.uz, dz_pre.span(), dh_prev);
}

void attention_forward(const ModelParams& params, std::span<const double> query,
                       const EncodedSource& enc, AttentionTrace& tr) {
  const std::size_t n = enc.source_len();
  const std::size_t A = params.dims.d_att();
  tr.query = Vec(std::vector<double>(query.begin(), query.end()));
  Vec projected(A);
  matvec_accumulate(params.att_query, query, projected.span());
  tr.hidden.assign(n, Vec(A));
  Vec scores(n);
  const auto score_w = params.att_score.row(0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec& u = tr.hidden[i];
    for (std::size_t k = 0; k < A; ++k) u[k] = std::tanh(projected[k] + enc.keys[i][k]);
    scores[i] = dot(score_w, u.span());
  }
  tr.weights = softmax(scores);
  tr.context = Vec(params.dims.d_annotation());
  for (std::size_t i = 0; i < n; ++i) axpy(tr.weights[i], enc.annotations[i].span(), tr.context.span());
}

void attention_backward(const ModelParams& params, const AttentionTrace& tr,
                        const EncodedSource& enc, std::span<const double> dcontext,
                        ModelParams& grad, std::span<double> dquery,
                        std::vector<Vec>& dannotations) {
  const std::size_t n = enc.source_len();
  const std::size_t A = params.dims.d_att();
  Vec dweights(n);
  double mean_dweight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dweights[i] = dot(dcontext, enc.annotations[i].span());
    mean_dweight += tr.weights[i] * dweights[i];
    axpy(tr.weights[i], dcontext, dannotations[i].span());
  }
  const auto score_w = params.att_score.row(0);
  auto dscore_w = grad.att_score.row(0);
  Vec dprojected(A);
  Vec dpre(A);
  for (std::size_t i = 0; i < n; ++i) {
    const double dscore = tr.weights[i] * (dweights[i] - mean_dweight);
    if (dscore == 0.0) continue;
    const Vec& u = tr.hidden[i];
    axpy(dscore, u.span(), dscore_w);
    for (std::size_t k = 0; k < A; ++k) dpre[k] = dscore * score_w[k] * (1.0 - u[k] * u[k]);
    axpy(1.0, dpre.span(), dprojected.span());
    outer_accumulate(grad.att_key, dpre.span(), enc.annotations[i].span());
    axpy(1.0, dpre.span(), grad.att_bias.flat());
    matvec_transposed_accumulate(params.att_key, dpre.span(), dannotations[i].span());
  }
  outer_accumulate(grad.att_query, dprojected.span(), tr.query.span());
  matvec_transposed_accumulate(params.att_query, dprojected.span(), dquery);
}

void step_forward(const ModelParams& params, const EncodedSource& enc,
                  std::span<const double> prev_h, TokenId prev_token,
                  std::span<const double> noise, StepTrace& tr) {
  const std::size_t H = params.dims.d_hid;
  const std::size_t E = params.dims.d_emb;
  require_token(prev_token, params.dims.tgt_vocab, "target");
  tr.prev_h = Vec(std::vector<double>(prev_h.begin(), prev_h.end()));
  tr.query = tr.prev_h;
  for (std::size_t i = 0; i < H; ++i) tr.query[i] += noise[i];
  tr.prev_token = prev_token;

  attention_forward(params, tr.query.span(), enc, tr.attention);

  Vec x(E + params.dims.d_annotation());
  const auto emb = params.tgt_embed.row(static_cast<std::size_t>(prev_token));
  std::copy(emb.begin(), emb.end(), x.begin());
  std::copy(tr.attention.context.begin(), tr.attention.context.end(), x.begin() + E);
  gru_forward(params.dec, x.span(), tr.query.span(), tr.gru);

  Vec logits(params.dims.tgt_vocab);
  for (std::size_t j = 0; j < logits.dim(); ++j) logits[j] = params.out_bias(j, 0);
  matvec_accumulate(params.out_hidden, tr.gru.h.span(), logits.span());
  matvec_accumulate(params.out_context, tr.attention.context.span(), logits.span());
  tr.log_probs = log_softmax(logits);
}

EncodedSource encode_traced(const ModelParams& params, const TokenSeq& source,
                            EncoderTrace* trace) {
  require(!source.empty(), "encode: empty source sequence");
  for (TokenId tok : source) require_token(tok, params.dims.src_vocab, "source");
  const std::size_t n = source.size();
  const std::size_t H = params.dims.d_hid;

  std::vector<GruTrace> fwd(n), bwd(n);
  Vec h(H);
  for (std::size_t i = 0; i < n; ++i) {
    gru_forward(params.enc_fwd, params.src_embed.row(static_cast<std::size_t>(source[i])),
                h.span(), fwd[i]);
    h = fwd[i].h;
  }
  h = Vec(H);
  for (std::size_t i = n; i-- > 0;) {
    gru_forward(params.enc_bwd, params.src_embed.row(static_cast<std::size_t>(source[i])),
                h.span(), bwd[i]);
    h = bwd[i].h;
  }

  std::vector<Vec> annotations;
  annotations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec a(2 * H);
    std::copy(fwd[i].h.begin(), fwd[i].h.end(), a.begin());
    std::copy(bwd[i].h.begin(), bwd[i].h.end(), a.begin() + H);
    annotations.push_back(std::move(a));
  }
  EncodedSource enc = from_annotations(params, std::move(annotations));
  if (trace != nullptr) {
    trace->source = source;
    trace->fwd = std::move(fwd);
    trace->bwd = std::move(bwd);
  }
  return enc;
}

}  // namespace detail

EncodedSource from_annotations(const ModelParams& params, std::vector<Vec> annotations) {
  EncodedSource enc;
  enc.keys.reserve(annotations.size());
  for (const Vec& a : annotations) {
    require(a.dim() == params.dims.d_annotation(), "from_annotations: annotation dimension mismatch");
    Vec key(params.dims.d_att());
    for (std::size_t k = 0; k < key.dim(); ++k) key[k] = params.att_bias(k, 0);
    matvec_accumulate(params.att_key, a.span(), key.span());
    enc.keys.push_back(std::move(key));
  }
  enc.annotations = std::move(annotations);
  return enc;
}

EncodedSource encode(const ModelParams& params, const TokenSeq& source) {
  return detail::encode_traced(params, source, nullptr);
}

DecoderState initial_state(const ModelParams& params, const EncodedSource& enc) {
  require(enc.source_len() > 0, "initial_state: empty encoded source");
  const std::size_t H = params.dims.d_hid;
  Vec mean(params.dims.d_annotation());
  for (const Vec& a : enc.annotations) axpy(1.0, a.span(), mean.span());
  for (double& x : mean) x /= static_cast<double>(enc.source_len());
  DecoderState s{Vec(H), 0};
  for (std::size_t i = 0; i < H; ++i) s.h[i] = params.init_bias(i, 0);
  matvec_accumulate(params.init_w, mean.span(), s.h.span());
  for (double& x : s.h) x = std::tanh(x);
  return s;
}

AttentionResult attention_context(const ModelParams& params, const Vec& query,
                                  const EncodedSource& enc) {
  require(query.dim() == params.dims.d_hid, "attention_context: query dimension mismatch");
  require(enc.source_len() > 0, "attention_context: empty encoded source");
  detail::AttentionTrace tr;
  detail::attention_forward(params, query.span(), enc, tr);
  return {std::move(tr.context), std::move(tr.weights)};
}

AttentionResult attention_context(const ModelParams& params, const DecoderState& state,
                                  const EncodedSource& enc) {
  return attention_context(params, state.h, enc);
}

StepResult decoder_step(const ModelParams& params, const DecoderState& state, TokenId prev_token,
                        const EncodedSource& enc, const Vec& noise) {
  require(state.h.dim() == params.dims.d_hid, "decoder_step: state dimension mismatch");
  require(noise.dim() == params.dims.d_hid, "decoder_step: noise dimension mismatch");
  require(enc.source_len() > 0, "decoder_step: empty encoded source");
  detail::StepTrace tr;
  detail::step_forward(params, enc, state.h.span(), prev_token, noise.span(), tr);
  return {DecoderState{std::move(tr.gru.h), state.t + 1}, std::move(tr.log_probs)};
}

std::vector<double> force_decode(const ModelParams& params, const EncodedSource& enc,
                                 const TokenSeq& target) {
  std::vector<double> out;
  out.reserve(target.size());
  const Vec zero(params.dims.d_hid);
  DecoderState state = initial_state(params, enc);
  TokenId prev = Vocab::kBos;
  for (TokenId tok : target) {
    require_token(tok, params.dims.tgt_vocab, "target");
    StepResult step = decoder_step(params, state, prev, enc, zero);
    out.push_back(step.log_probs[static_cast<std::size_t>(tok)]);
    state = std::move(step.state);
    prev = tok;
  }
  return out;
}

double score_sequence(const ModelParams& params, const EncodedSource& enc, const TokenSeq& target) {
  require(!target.empty() && target.back() == Vocab::kEos,
          "score_sequence: target must end with </s>");
  double total = 0.0;
  for (double lp : force_decode(params, enc, target)) total += lp;
  return total;
}

double score_sequence(const ModelParams& params, const TokenSeq& source, const TokenSeq& target) {
  return score_sequence(params, encode(params, source), target);
}

}  // namespace npad
