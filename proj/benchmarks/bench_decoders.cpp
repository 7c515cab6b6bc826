#include <benchmark/benchmark.h>

#include "npad/decoders.hpp"
#include "npad/npad.hpp"

namespace {

using namespace npad;

ModelParams bench_model(std::size_t vocab, std::size_t hidden) {
  RngStream rng(11);
  return ModelParams::random_uniform({vocab, vocab, hidden / 2, hidden}, rng, 0.3);
}

const TokenSeq kSource{3, 4, 5, 6, 7, 8, 9, 10};

void BM_Encode(benchmark::State& state) {
  const ModelParams p = bench_model(20, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode(p, kSource));
}
BENCHMARK(BM_Encode)->Arg(16)->Arg(32)->Arg(64);

void BM_Greedy(benchmark::State& state) {
  const ModelParams p = bench_model(20, static_cast<std::size_t>(state.range(0)));
  const EncodedSource enc = encode(p, kSource);
  for (auto _ : state) {
    NoiseSource silent = NoiseSource::silent();
    benchmark::DoNotOptimize(greedy_decode(p, enc, silent, DecodeLimits{20}));
  }
}
BENCHMARK(BM_Greedy)->Arg(16)->Arg(32)->Arg(64);

void BM_Beam(benchmark::State& state) {
  const ModelParams p = bench_model(20, 32);
  const EncodedSource enc = encode(p, kSource);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    NoiseSource silent = NoiseSource::silent();
    benchmark::DoNotOptimize(beam_decode(p, enc, k, silent, DecodeLimits{20}));
  }
}
BENCHMARK(BM_Beam)->Arg(1)->Arg(5)->Arg(10);

void BM_Diverse(benchmark::State& state) {
  const ModelParams p = bench_model(20, 32);
  const EncodedSource enc = encode(p, kSource);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diverse_beam_decode(p, enc, 10, 0.1, DecodeLimits{20}));
  }
}
BENCHMARK(BM_Diverse);

void BM_Npad(benchmark::State& state) {
  const ModelParams p = bench_model(20, 32);
  const EncodedSource enc = encode(p, kSource);
  NpadConfig cfg;
  cfg.chains = static_cast<std::size_t>(state.range(0));
  cfg.schedule.sigma0 = 0.3;
  cfg.base_seed = 7;
  cfg.limits = DecodeLimits{20};
  const auto workers = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(npad_decode(p, enc, cfg, workers));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Npad)->Args({1, 1})->Args({10, 1})->Args({50, 1})->Args({50, 4})->UseRealTime();

void BM_Exact(benchmark::State& state) {
  const ModelParams p = bench_model(6, 16);
  const EncodedSource enc = encode(p, {3, 4, 5});
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_decode(p, enc, DecodeLimits{static_cast<int>(state.range(0))}));
  }
}
BENCHMARK(BM_Exact)->Arg(3)->Arg(5);

}  // namespace
