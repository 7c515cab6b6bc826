#include "npad/decoders.hpp"

#include <algorithm>
#include <cmath>

#include "npad/errors.hpp"

namespace npad {

double noise_sigma(const NoiseSchedule& schedule, int t) {
  require(t >= 1, "noise_sigma: step index must be >= 1");
  switch (schedule.rule) {
    case ScheduleRule::inverse_t:
      return schedule.sigma0 / static_cast<double>(t);
  }
  return 0.0;
}

Vec NoiseSource::next(int t, std::size_t dim) {
  if (!rng_) return Vec(dim);
  return gaussian_vec(*rng_, dim, noise_sigma(schedule_, t));
}

DecodeLimits DecodeLimits::for_source(std::size_t source_len) {
  return {static_cast<int>(2 * source_len + 5)};
}

namespace {

void check_limits(const DecodeLimits& limits) {
  require(limits.max_len >= 1, "decode: max_len must be >= 1");
}

std::size_t argmax(const Vec& v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.dim(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

// Higher logp wins; equal logp goes to the lexicographically smaller sequence.
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return a.tokens < b.tokens;
}

struct Candidate {
  double selection;  // model score minus any diversity penalty
  double score;      // parent logp + step log-prob
  double step_logp;
  std::size_t parent;
  TokenId token;
};

// Model order on candidates: selection score, then step log-prob (separates
// sums that round to the same double), then parent, then token.
bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.selection != b.selection) return a.selection > b.selection;
  if (a.step_logp != b.step_logp) return a.step_logp > b.step_logp;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

BeamResult beam_search(const ModelParams& params, const EncodedSource& enc, std::size_t beam_width,
                       double eta, NoiseSource& noise, DecodeLimits limits) {
  require(beam_width >= 1, "beam_decode: beam width must be >= 1");
  require(eta >= 0.0 && std::isfinite(eta), "diverse_beam_decode: eta must be finite and >= 0");
  check_limits(limits);
  const std::size_t V = params.dims.tgt_vocab;

  std::vector<Hypothesis> live{Hypothesis{{}, 0.0, initial_state(params, enc), false}};
  std::size_t width = beam_width;
  BeamResult result;

  for (int t = 1; t <= limits.max_len && width > 0 && !live.empty(); ++t) {
    const Vec eps = noise.next(t, params.dims.d_hid);
    std::vector<StepResult> steps;
    steps.reserve(live.size());
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * V);
    std::vector<TokenId> sibling_order(V);
    for (std::size_t p = 0; p < live.size(); ++p) {
      const TokenId prev = live[p].tokens.empty() ? Vocab::kBos : live[p].tokens.back();
      steps.push_back(decoder_step(params, live[p].state, prev, enc, eps));
      const Vec& lp = steps.back().log_probs;
      for (std::size_t j = 0; j < V; ++j) sibling_order[j] = static_cast<TokenId>(j);
      if (eta > 0.0) {
        std::stable_sort(sibling_order.begin(), sibling_order.end(), [&](TokenId a, TokenId b) {
          return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(b)];
        });
      }
      for (std::size_t rank = 0; rank < V; ++rank) {
        const TokenId j = sibling_order[rank];
        const double step_logp = lp[static_cast<std::size_t>(j)];
        const double score = live[p].logp + step_logp;
        const double selection = eta > 0.0 ? score - eta * static_cast<double>(rank + 1) : score;
        candidates.push_back({selection, score, step_logp, p, j});
      }
    }

    const std::size_t take = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), ranks_before);

    std::vector<Hypothesis> next_live;
    for (std::size_t k = 0; k < take; ++k) {
      const Candidate& c = candidates[k];
      Hypothesis h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.logp = c.score;
      h.state = steps[c.parent].state;
      h.complete = c.token == Vocab::kEos;
      if (h.complete) {
        result.completed.push_back(std::move(h));
        --width;
      } else {
        next_live.push_back(std::move(h));
      }
    }
    live = std::move(next_live);
  }

  const auto& pool = result.completed.empty() ? live : result.completed;
  result.best = pool.front();
  for (const auto& h : pool) {
    if (better(h, result.best)) result.best = h;
  }
  return result;
}

Hypothesis sample_impl(const ModelParams& params, const EncodedSource& enc, RngStream& rng,
                       DecodeLimits limits, NoiseSource& noise) {
  check_limits(limits);
  Hypothesis h{{}, 0.0, initial_state(params, enc), false};
  TokenId prev = Vocab::kBos;
  for (int t = 1; t <= limits.max_len; ++t) {
    StepResult step = decoder_step(params, h.state, prev, enc, noise.next(t, params.dims.d_hid));
    Vec probs(step.log_probs.dim());
    double total = 0.0;
    for (std::size_t j = 0; j < probs.dim(); ++j) {
      probs[j] = std::exp(step.log_probs[j]);
      total += probs[j];
    }
    for (double& p : probs) p /= total;
    const auto j = static_cast<TokenId>(categorical_sample(rng, probs));
    h.tokens.push_back(j);
    h.logp += step.log_probs[static_cast<std::size_t>(j)];
    h.state = std::move(step.state);
    prev = j;
    if (j == Vocab::kEos) {
      h.complete = true;
      break;
    }
  }
  return h;
}

}  // namespace

Hypothesis greedy_decode(const ModelParams& params, const EncodedSource& enc, NoiseSource& noise,
                         DecodeLimits limits) {
  check_limits(limits);
  Hypothesis h{{}, 0.0, initial_state(params, enc), false};
  TokenId prev = Vocab::kBos;
  for (int t = 1; t <= limits.max_len; ++t) {
    StepResult step = decoder_step(params, h.state, prev, enc, noise.next(t, params.dims.d_hid));
    const auto j = static_cast<TokenId>(argmax(step.log_probs));
    h.tokens.push_back(j);
    h.logp += step.log_probs[static_cast<std::size_t>(j)];
    h.state = std::move(step.state);
    prev = j;
    if (j == Vocab::kEos) {
      h.complete = true;
      break;
    }
  }
  return h;
}

BeamResult beam_decode(const ModelParams& params, const EncodedSource& enc, std::size_t beam_width,
                       NoiseSource& noise, DecodeLimits limits) {
  return beam_search(params, enc, beam_width, 0.0, noise, limits);
}

BeamResult diverse_beam_decode(const ModelParams& params, const EncodedSource& enc,
                               std::size_t beam_width, double eta, DecodeLimits limits) {
  NoiseSource silent = NoiseSource::silent();
  return beam_search(params, enc, beam_width, eta, silent, limits);
}

Hypothesis sample_decode(const ModelParams& params, const EncodedSource& enc, RngStream& rng,
                         DecodeLimits limits, NoiseSource& noise) {
  return sample_impl(params, enc, rng, limits, noise);
}

Hypothesis sample_decode(const ModelParams& params, const EncodedSource& enc, RngStream& rng,
                         DecodeLimits limits) {
  NoiseSource silent = NoiseSource::silent();
  return sample_impl(params, enc, rng, limits, silent);
}

Hypothesis exact_decode(const ModelParams& params, const EncodedSource& enc, DecodeLimits limits) {
  check_limits(limits);
  const std::size_t V = params.dims.tgt_vocab;
  const double space = std::pow(static_cast<double>(V), limits.max_len);
  if (space > kExactSearchBound) {
    throw SearchSpaceError("exact_decode: |V|^max_len = " + std::to_string(space) +
                           " exceeds the bound of 1e6");
  }

  // Non-</s> symbols in index order; prefixes are enumerated as counters.
  std::vector<TokenId> body;
  for (std::size_t j = 0; j < V; ++j) {
    if (static_cast<TokenId>(j) != Vocab::kEos) body.push_back(static_cast<TokenId>(j));
  }

  Hypothesis best;
  bool have_best = false;
  for (int len = 1; len <= limits.max_len; ++len) {
    const std::size_t prefix_len = static_cast<std::size_t>(len - 1);
    std::vector<std::size_t> digits(prefix_len, 0);
    while (true) {
      Hypothesis h;
      h.tokens.reserve(static_cast<std::size_t>(len));
      for (std::size_t d : digits) h.tokens.push_back(body[d]);
      h.tokens.push_back(Vocab::kEos);
      h.logp = score_sequence(params, enc, h.tokens);
      h.complete = true;
      if (!have_best || better(h, best)) {
        best = std::move(h);
        have_best = true;
      }
      std::size_t pos = prefix_len;
      while (pos > 0 && ++digits[pos - 1] == body.size()) {
        digits[pos - 1] = 0;
        --pos;
      }
      if (pos == 0) break;
    }
  }

  // Recover the final decoder state of the winner.
  const Vec zero(params.dims.d_hid);
  DecoderState state = initial_state(params, enc);
  TokenId prev = Vocab::kBos;
  for (TokenId tok : best.tokens) {
    state = decoder_step(params, state, prev, enc, zero).state;
    prev = tok;
  }
  best.state = std::move(state);
  return best;
}

}  // namespace npad
