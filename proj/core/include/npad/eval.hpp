#pragma once

#include <span>
#include <string>
#include <vector>

#include "npad/vocab.hpp"

namespace npad {

struct EvalRecord {
  std::size_t input_id = 0;
  std::string strategy;
  TokenSeq tokens;              // decoded, including </s> when complete
  double rescored_logp = 0.0;   // non-noisy log p(tokens | source)
  TokenSeq reference;           // including </s>
  bool complete = true;
};

// Mean over sentences of -rescored_logp.
double mean_nll(std::span<const EvalRecord> records);
// Total -rescored_logp over total decoded tokens.
double mean_nll_per_token(std::span<const EvalRecord> records);

// Copy of `tokens` without a trailing </s>.
TokenSeq strip_eos(const TokenSeq& tokens);

// Corpus BLEU with one reference per hypothesis: clipped n-gram matches and
// candidate n-gram totals are summed over the corpus for n = 1..max_n; the
// score is BP * exp(mean_n log p_n), BP = min(1, exp(1 - r/c)). Without
// smoothing any zero precision gives 0. With smoothing, n >= 2 uses
// (matches + 1) / (total + 1).
double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                   int max_n = 4, bool smooth = false);

}  // namespace npad
