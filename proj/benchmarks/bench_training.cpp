#include <benchmark/benchmark.h>

#include "npad/tasks.hpp"
#include "npad/training.hpp"

namespace {

using namespace npad;

void BM_NllLossBatch(benchmark::State& state) {
  TaskConfig task;
  task.kind = TaskKind::reverse;
  task.count = 16;
  const auto batch = gen_task(task);
  RngStream rng(3);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const ModelParams p = ModelParams::random_uniform(
      {task.src_content + 3, task.tgt_content + 3, hidden / 2, hidden}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nll_loss(p, batch));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch.size()));
}
BENCHMARK(BM_NllLossBatch)->Arg(16)->Arg(32);

}  // namespace
