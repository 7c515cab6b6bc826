#include "npad/npad.hpp"

#include <cmath>

#include "npad/errors.hpp"
#include "npad/parallel.hpp"

namespace npad {

std::string to_string(InnerKind kind) {
  switch (kind) {
    case InnerKind::greedy: return "greedy";
    case InnerKind::beam: return "beam";
    case InnerKind::sampling: return "sample";
  }
  return "?";
}

InnerKind parse_inner_kind(const std::string& name) {
  if (name == "greedy") return InnerKind::greedy;
  if (name == "beam") return InnerKind::beam;
  if (name == "sample" || name == "sampling") return InnerKind::sampling;
  throw ConfigError("unknown inner decoder '" + name + "'");
}

void NpadConfig::validate() const {
  require(chains >= 1, "npad: chains must be >= 1");
  require(schedule.sigma0 >= 0.0 && std::isfinite(schedule.sigma0), "npad: sigma0 must be >= 0");
  require(inner.kind != InnerKind::beam || inner.beam_width >= 1, "npad: beam width must be >= 1");
  require(limits.max_len >= 1, "npad: max_len must be >= 1");
}

std::uint64_t chain_seed(const NpadConfig& cfg, std::size_t m) {
  return derive_seed(cfg.base_seed, static_cast<std::uint64_t>(m));
}

double rescore(const ModelParams& params, const EncodedSource& enc, const TokenSeq& tokens) {
  if (!tokens.empty() && tokens.back() == Vocab::kEos) return score_sequence(params, enc, tokens);
  double total = 0.0;
  for (double lp : force_decode(params, enc, tokens)) total += lp;
  return total;
}

ChainResult run_chain(const ModelParams& params, const EncodedSource& enc, const NpadConfig& cfg,
                      std::size_t m) {
  cfg.validate();
  require(m < cfg.chains, "run_chain: chain index out of range");
  const double sigma0 = (m == 0 && cfg.include_zero_chain) ? 0.0 : cfg.schedule.sigma0;
  const std::uint64_t seed = chain_seed(cfg, m);

  NoiseSchedule schedule = cfg.schedule;
  schedule.sigma0 = sigma0;
  NoiseSource noise = sigma0 == 0.0
                          ? NoiseSource::silent()
                          : NoiseSource::scheduled(RngStream(derive_seed(seed, 0)), schedule);

  ChainResult out;
  out.chain_index = m;
  out.sigma0_effective = sigma0;
  switch (cfg.inner.kind) {
    case InnerKind::greedy:
      out.hypothesis = greedy_decode(params, enc, noise, cfg.limits);
      break;
    case InnerKind::beam:
      out.hypothesis = beam_decode(params, enc, cfg.inner.beam_width, noise, cfg.limits).best;
      break;
    case InnerKind::sampling: {
      RngStream sampler(derive_seed(seed, 1));
      out.hypothesis = sample_decode(params, enc, sampler, cfg.limits, noise);
      break;
    }
  }
  out.noisy_logp = out.hypothesis.logp;
  out.rescored_logp = rescore(params, enc, out.hypothesis.tokens);
  return out;
}

std::size_t select_chain(const std::vector<ChainResult>& chains) {
  require(!chains.empty(), "select_chain: no chains");
  std::size_t best = 0;
  for (std::size_t m = 1; m < chains.size(); ++m) {
    const bool cand_complete = chains[m].hypothesis.complete;
    const bool best_complete = chains[best].hypothesis.complete;
    if (cand_complete != best_complete) {
      if (cand_complete) best = m;
      continue;
    }
    if (chains[m].rescored_logp > chains[best].rescored_logp) best = m;
  }
  return best;
}

NpadResult npad_decode(const ModelParams& params, const EncodedSource& enc, const NpadConfig& cfg,
                       std::size_t workers) {
  cfg.validate();
  NpadResult result;
  result.chains.resize(cfg.chains);
  parallel_for(cfg.chains, workers,
               [&](std::size_t m) { result.chains[m] = run_chain(params, enc, cfg, m); });
  result.best = result.chains[select_chain(result.chains)];
  return result;
}

}  // namespace npad
