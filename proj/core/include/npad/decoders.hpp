#pragma once

#include <cstddef>
#include <vector>

#include "npad/model.hpp"
#include "npad/noise.hpp"

namespace npad {

struct DecodeLimits {
  int max_len = 1;

  // 2 * source_len + 5.
  static DecodeLimits for_source(std::size_t source_len);
};

struct Hypothesis {
  TokenSeq tokens;
  double logp = 0.0;  // sum of the per-step log-probs used while decoding
  DecoderState state;
  bool complete = false;  // last token is </s>

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> completed;  // in completion order
};

// Stepwise argmax; ties go to the lowest token index.
Hypothesis greedy_decode(const ModelParams& params, const EncodedSource& enc, NoiseSource& noise,
                         DecodeLimits limits);

// Beam search with shrinking live width: every completed hypothesis selected
// at a step is set aside and reduces the width by one; the search stops when
// the width reaches 0 or at max_len. Returns the completed hypothesis with the
// highest logp, or the best live one (complete = false) if none completed.
// All hypotheses of a step share the step's noise draw.
BeamResult beam_decode(const ModelParams& params, const EncodedSource& enc, std::size_t beam_width,
                       NoiseSource& noise, DecodeLimits limits);

// Diverse beam search: at selection time the r-th best child (r = 1, 2, ...)
// of each parent is penalised by eta * r. Reported scores are unpenalised.
BeamResult diverse_beam_decode(const ModelParams& params, const EncodedSource& enc,
                               std::size_t beam_width, double eta, DecodeLimits limits);

// Ancestral sampling from the per-step categorical distributions.
Hypothesis sample_decode(const ModelParams& params, const EncodedSource& enc, RngStream& rng,
                         DecodeLimits limits, NoiseSource& noise);
Hypothesis sample_decode(const ModelParams& params, const EncodedSource& enc, RngStream& rng,
                         DecodeLimits limits);

inline constexpr double kExactSearchBound = 1e6;

// Exhaustive search over every </s>-terminated sequence of length <= max_len,
// each scored with score_sequence. Ties go to the lexicographically smallest
// token sequence. Refuses with SearchSpaceError when |V|^max_len > 1e6.
Hypothesis exact_decode(const ModelParams& params, const EncodedSource& enc, DecodeLimits limits);

}  // namespace npad
