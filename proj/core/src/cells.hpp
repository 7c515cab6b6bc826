#pragma once

// Forward/backward kernels shared by inference (model.cpp) and training
// (training.cpp). Forward passes record everything backward needs, so the
// training forward is the inference forward.

#include <span>
#include <vector>

#include "npad/model.hpp"

namespace npad::detail {

struct GruTrace {
  Vec x;
  Vec h_prev;
  Vec z;
  Vec r;
  Vec rh;    // r * h_prev
  Vec cand;  // tanh candidate
  Vec h;
};

void gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev,
                 GruTrace& trace);

// Accumulates parameter gradients into `grad`, input gradient into `dx` and
// previous-state gradient into `dh_prev`.
void gru_backward(const GruWeights& w, const GruTrace& trace, std::span<const double> dh,
                  GruWeights& grad, std::span<double> dx, std::span<double> dh_prev);

struct AttentionTrace {
  Vec query;
  std::vector<Vec> hidden;  // tanh(att_query q + key_i), one per position
  Vec weights;
  Vec context;
};

void attention_forward(const ModelParams& params, std::span<const double> query,
                       const EncodedSource& enc, AttentionTrace& trace);

// Accumulates into `grad`, `dquery` and `dannotations` (one per position).
void attention_backward(const ModelParams& params, const AttentionTrace& trace,
                        const EncodedSource& enc, std::span<const double> dcontext,
                        ModelParams& grad, std::span<double> dquery,
                        std::vector<Vec>& dannotations);

struct StepTrace {
  Vec prev_h;
  Vec query;  // prev_h + noise
  AttentionTrace attention;
  TokenId prev_token = 0;
  GruTrace gru;
  Vec log_probs;
};

// Decoder transition plus readout, recording the trace.
void step_forward(const ModelParams& params, const EncodedSource& enc,
                  std::span<const double> prev_h, TokenId prev_token,
                  std::span<const double> noise, StepTrace& trace);

struct EncoderTrace {
  TokenSeq source;
  std::vector<GruTrace> fwd;
  std::vector<GruTrace> bwd;  // bwd[i] is the step that produced position i
};

EncodedSource encode_traced(const ModelParams& params, const TokenSeq& source,
                            EncoderTrace* trace);

}  // namespace npad::detail
