#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npad/decoders.hpp"

namespace npad {

enum class InnerKind { greedy, beam, sampling };

struct InnerDecoder {
  InnerKind kind = InnerKind::greedy;
  std::size_t beam_width = 1;  // used when kind == beam
};

std::string to_string(InnerKind kind);
InnerKind parse_inner_kind(const std::string& name);

struct NpadConfig {
  std::size_t chains = 1;
  NoiseSchedule schedule;
  InnerDecoder inner;
  // Chain 0 runs with sigma0 = 0, so the result is never worse than the
  // plain inner decoder.
  bool include_zero_chain = true;
  std::uint64_t base_seed = 0;
  DecodeLimits limits;

  // Throws ContractViolation on chains < 1, negative sigma0, beam width 0 or
  // max_len < 1.
  void validate() const;
};

struct ChainResult {
  std::size_t chain_index = 0;
  double sigma0_effective = 0.0;
  Hypothesis hypothesis;
  double noisy_logp = 0.0;     // score accumulated while decoding with noise
  double rescored_logp = 0.0;  // non-noisy log p(tokens | source)

  friend bool operator==(const ChainResult&, const ChainResult&) = default;
};

struct NpadResult {
  ChainResult best;
  std::vector<ChainResult> chains;  // indexed by chain
};

// Seed of chain m: derive_seed(base_seed, m). The noise stream and (for the
// sampling inner decoder) the sampling stream are children of that seed.
std::uint64_t chain_seed(const NpadConfig& cfg, std::size_t m);

ChainResult run_chain(const ModelParams& params, const EncodedSource& enc, const NpadConfig& cfg,
                      std::size_t m);

// Runs chains 0..M-1 independently (on up to `workers` threads) and selects by
// rescored log-probability, ties to the lowest chain index. Complete
// hypotheses are preferred; if no chain completes, the best incomplete one is
// returned with complete = false.
NpadResult npad_decode(const ModelParams& params, const EncodedSource& enc, const NpadConfig& cfg,
                       std::size_t workers = 1);

// Selection over already-computed chains (same rule as npad_decode).
std::size_t select_chain(const std::vector<ChainResult>& chains);

// Non-noisy log-probability of a decoded sequence. Complete sequences are
// scored with score_sequence; incomplete ones by their prefix log-probability.
double rescore(const ModelParams& params, const EncodedSource& enc, const TokenSeq& tokens);

}  // namespace npad
