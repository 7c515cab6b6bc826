#pragma once

// Attention-based conditional recurrent language model.
//
// Encoder: forward and backward GRUs over source embeddings; annotation i is
// [fwd_i ; bwd_i] (dim 2H).
//
// GRU cell, input x and previous state h:
//   z  = sigmoid(Wz x + Uz h + bias_z)
//   r  = sigmoid(Wr x + Ur h + bias_r)
//   c~ = tanh(Wh x + Uh (r * h) + bias_h)
//   h' = (1 - z) * h + z * c~
//
// Decoder initial state: h_0 = tanh(init_w * mean_i(annotation_i) + init_bias).
//
// Decoder step t (t >= 1) from state h_{t-1}, previous token y_{t-1} (<s> at
// t = 1) and noise vector eps_t:
//   q       = h_{t-1} + eps_t
//   e_i     = att_score . tanh(att_query q + att_key a_i + att_bias)
//   alpha   = softmax(e),   c_t = sum_i alpha_i a_i
//   h_t     = GRU_dec(q, [E_tgt[y_{t-1}] ; c_t])
//   logits  = out_hidden h_t + out_context c_t + out_bias
//   log p(y_t = j | y_<t, source) = log_softmax(logits)_j
//
// The attention hidden size equals the decoder hidden size H.

#include <cstddef>
#include <string>
#include <vector>

#include "npad/numeric.hpp"
#include "npad/vocab.hpp"

namespace npad {

struct ModelDims {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t d_emb = 0;
  std::size_t d_hid = 0;

  std::size_t d_att() const { return d_hid; }
  std::size_t d_annotation() const { return 2 * d_hid; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct GruWeights {
  Mat wz, wr, wh;  // hidden x input
  Mat uz, ur, uh;  // hidden x hidden
  Mat bias_z, bias_r, bias_h;  // hidden x 1

  static GruWeights zeros(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return wz.cols(); }
  std::size_t hidden_dim() const { return wz.rows(); }

  friend bool operator==(const GruWeights&, const GruWeights&) = default;

  template <typename Self, typename Fn>
  static void visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".wz", self.wz);
    fn(prefix + ".wr", self.wr);
    fn(prefix + ".wh", self.wh);
    fn(prefix + ".uz", self.uz);
    fn(prefix + ".ur", self.ur);
    fn(prefix + ".uh", self.uh);
    fn(prefix + ".bias_z", self.bias_z);
    fn(prefix + ".bias_r", self.bias_r);
    fn(prefix + ".bias_h", self.bias_h);
  }
};

// All learned weights. Tensor names (used by the model file and gradient
// reports) are fixed by for_each_tensor; any name containing "bias" is a bias.
struct ModelParams {
  ModelDims dims;
  Mat src_embed;  // |V_src| x E
  Mat tgt_embed;  // |V_tgt| x E
  GruWeights enc_fwd;  // input E
  GruWeights enc_bwd;  // input E
  Mat init_w;     // H x 2H
  Mat init_bias;  // H x 1
  Mat att_query;  // H x H
  Mat att_key;    // H x 2H
  Mat att_bias;   // H x 1
  Mat att_score;  // 1 x H
  GruWeights dec;  // input E + 2H
  Mat out_hidden;   // |V_tgt| x H
  Mat out_context;  // |V_tgt| x 2H
  Mat out_bias;     // |V_tgt| x 1

  static ModelParams zeros(const ModelDims& dims);
  // Weights uniform in [-scale, scale], biases zero.
  static ModelParams random_uniform(const ModelDims& dims, RngStream& rng, double scale = 0.08);

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    visit_tensors(*this, fn);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    visit_tensors(*this, fn);
  }

  std::size_t parameter_count() const;
  // Throws ContractViolation if any tensor shape disagrees with dims or any
  // entry is non-finite.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  template <typename Self, typename Fn>
  static void visit_tensors(Self& self, Fn& fn) {
    fn(std::string("src_embed"), self.src_embed);
    fn(std::string("tgt_embed"), self.tgt_embed);
    GruWeights::visit(self.enc_fwd, "enc_fwd", fn);
    GruWeights::visit(self.enc_bwd, "enc_bwd", fn);
    fn(std::string("init_w"), self.init_w);
    fn(std::string("init_bias"), self.init_bias);
    fn(std::string("att_query"), self.att_query);
    fn(std::string("att_key"), self.att_key);
    fn(std::string("att_bias"), self.att_bias);
    fn(std::string("att_score"), self.att_score);
    GruWeights::visit(self.dec, "dec", fn);
    fn(std::string("out_hidden"), self.out_hidden);
    fn(std::string("out_context"), self.out_context);
    fn(std::string("out_bias"), self.out_bias);
  }
};

bool is_bias_tensor(const std::string& name);

struct EncodedSource {
  std::vector<Vec> annotations;  // one per source position, dim 2H
  std::vector<Vec> keys;         // att_key * a_i + att_bias, cached per source

  std::size_t source_len() const { return annotations.size(); }
};

struct DecoderState {
  Vec h;
  int t = 0;

  friend bool operator==(const DecoderState&, const DecoderState&) = default;
};

struct AttentionResult {
  Vec context;
  Vec weights;
};

struct StepResult {
  DecoderState state;
  Vec log_probs;
};

EncodedSource encode(const ModelParams& params, const TokenSeq& source);
// Wraps externally supplied annotations (dim 2H each) and caches their keys.
EncodedSource from_annotations(const ModelParams& params, std::vector<Vec> annotations);

DecoderState initial_state(const ModelParams& params, const EncodedSource& enc);

AttentionResult attention_context(const ModelParams& params, const Vec& query,
                                  const EncodedSource& enc);
AttentionResult attention_context(const ModelParams& params, const DecoderState& state,
                                  const EncodedSource& enc);

// One decoder transition with `noise` added to the previous state before both
// attention and the GRU. Pass a zero vector for the non-noisy model.
StepResult decoder_step(const ModelParams& params, const DecoderState& state, TokenId prev_token,
                        const EncodedSource& enc, const Vec& noise);

// Per-step log p(target_t | target_<t, source) under the non-noisy model.
std::vector<double> force_decode(const ModelParams& params, const EncodedSource& enc,
                                 const TokenSeq& target);

// log p(target | source); target must end with </s>.
double score_sequence(const ModelParams& params, const EncodedSource& enc, const TokenSeq& target);
double score_sequence(const ModelParams& params, const TokenSeq& source, const TokenSeq& target);

}  // namespace npad
