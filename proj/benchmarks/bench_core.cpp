#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "bppo/analysis.hpp"
#include "bppo/objective.hpp"
#include "bppo/policy.hpp"
#include "bppo/rollout.hpp"
#include "bppo/tasks.hpp"

using namespace bppo;

namespace {

PolicyConfig sized_config(int64_t d_model) {
  PolicyConfig pc;
  pc.context_len = 32;
  pc.d_model = d_model;
  pc.n_heads = 2;
  pc.n_layers = 2;
  pc.exit_depths = {1, 2};
  return pc;
}

}  // namespace

// ----------------------------------------------------------------- forward

static void bm_forward_logits(benchmark::State& state) {
  const PolicyConfig pc = sized_config(state.range(0));
  const PolicyParams params = init_params(pc, 1);
  std::vector<int> toks(24);
  for (size_t i = 0; i < toks.size(); ++i) toks[i] = static_cast<int>(i % 30);
  for (auto _ : state) {
    Tensor out = forward_logits(params, toks, pc.deepest_exit());
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_forward_logits)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

// ---------------------------------------------------------------- sampling

static void bm_sample_response(benchmark::State& state) {
  const PolicyConfig pc = sized_config(state.range(0));
  const PolicyParams params = init_params(pc, 1);
  TaskSpec task;
  const TaskInstance inst = gen_instance(task, 3);
  uint64_t seed = 0;
  for (auto _ : state) {
    Trajectory t = sample_response(params, inst.prompt_tokens, 1.0, 8, ++seed);
    benchmark::DoNotOptimize(t.response_tokens.data());
  }
}
BENCHMARK(bm_sample_response)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

// -------------------------------------------------------- loss + gradients
// the paired scenarios make the update-cost gap between the two objectives
// directly visible in one run

static void bm_grpo_loss(benchmark::State& state) {
  const FdScenario sc = make_fd_scenario(LossKind::Grpo, 5, sized_config(state.range(0)));
  for (auto _ : state) {
    LossResult r = grpo_loss(sc.theta, sc.group, sc.ref, sc.objective);
    benchmark::DoNotOptimize(r.grads.data());
  }
}
BENCHMARK(bm_grpo_loss)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void bm_bppo_loss(benchmark::State& state) {
  const FdScenario sc = make_fd_scenario(LossKind::Bppo, 5, sized_config(state.range(0)));
  for (auto _ : state) {
    LossResult r = bppo_loss(sc.theta, sc.group, sc.pair, sc.ref, sc.objective);
    benchmark::DoNotOptimize(r.grads.data());
  }
}
BENCHMARK(bm_bppo_loss)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
