#include "npad/eval.hpp"

#include <cmath>
#include <map>

#include "npad/errors.hpp"

namespace npad {

double mean_nll(std::span<const EvalRecord> records) {
  require(!records.empty(), "mean_nll: no records");
  double total = 0.0;
  for (const auto& r : records) total -= r.rescored_logp;
  return total / static_cast<double>(records.size());
}

double mean_nll_per_token(std::span<const EvalRecord> records) {
  require(!records.empty(), "mean_nll_per_token: no records");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& r : records) {
    total -= r.rescored_logp;
    tokens += r.tokens.size();
  }
  require(tokens > 0, "mean_nll_per_token: no decoded tokens");
  return total / static_cast<double>(tokens);
}

TokenSeq strip_eos(const TokenSeq& tokens) {
  TokenSeq out = tokens;
  if (!out.empty() && out.back() == Vocab::kEos) out.pop_back();
  return out;
}

namespace {

std::map<TokenSeq, int> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<TokenSeq, int> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(i),
                      seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                   int max_n, bool smooth) {
  require(hypotheses.size() == references.size(),
          "corpus_bleu: hypothesis and reference counts differ");
  require(max_n >= 1, "corpus_bleu: max_n must be >= 1");
  const auto N = static_cast<std::size_t>(max_n);
  std::vector<double> matches(N, 0.0), totals(N, 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    require(!references[s].empty(), "corpus_bleu: empty reference at index " + std::to_string(s));
    hyp_len += static_cast<double>(hypotheses[s].size());
    ref_len += static_cast<double>(references[s].size());
    for (std::size_t n = 1; n <= N; ++n) {
      const auto hyp = ngram_counts(hypotheses[s], n);
      const auto ref = ngram_counts(references[s], n);
      for (const auto& [gram, count] : hyp) {
        totals[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0.0) return 0.0;

  double log_precision = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    double m = matches[n], t = totals[n];
    if (smooth && n > 0) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) return 0.0;
    log_precision += std::log(m / t);
  }
  log_precision /= static_cast<double>(N);
  const double brevity = hyp_len >= ref_len ? 0.0 : 1.0 - ref_len / hyp_len;
  return std::exp(brevity + log_precision);
}

}  // namespace npad
