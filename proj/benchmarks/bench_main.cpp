#include <benchmark/benchmark.h>

#include "tsde/evaluation.hpp"
#include "tsde/learner.hpp"
#include "tsde/oracle.hpp"
#include "tsde/policies.hpp"

using namespace tsde;

namespace {

SystemParams channels(int K) {
  const std::pair<double, double> pairs[] = {{.3, .7}, {.4, .6}, {.5, .5}, {.6, .4},
                                             {.2, .8}, {.7, .3}, {.1, .6}, {.45, .85}};
  SystemParams theta;
  for (int k = 0; k < K; ++k) theta.push_back(GilbertElliott{pairs[k % 8].first, pairs[k % 8].second}.arm());
  return theta;
}

void BM_WhittleTable(benchmark::State& state) {
  const auto arm = GilbertElliott{.3, .7}.arm();
  for (auto _ : state) benchmark::DoNotOptimize(whittle_index_table(arm, state.range(0), 1e-6));
}
BENCHMARK(BM_WhittleTable)->Arg(16)->Arg(77)->Arg(98)->Unit(benchmark::kMillisecond);

void BM_PredictiveLookup(benchmark::State& state) {
  const auto arm = GilbertElliott{.05, .97}.arm();
  std::int64_t n = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(arm.predictive_reward(1, n));
    n = n % 50'000 + 1;
  }
}
BENCHMARK(BM_PredictiveLookup);

void BM_SimulationStep(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto theta = channels(K);
  const auto policy = PolicyMapper(PolicyMappingId::kMyopic, MapperOptions{}).map(theta, K / 2);
  Environment env(theta, std::vector<State>(K, 1), K / 2);
  Rng rng(1);
  Action a;
  StepOutcome out;
  for (auto _ : state) {
    policy->act(env.meta(), a);
    benchmark::DoNotOptimize(env.expected_reward(a));
    env.step_into(a, rng, out);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimulationStep)->Arg(4)->Arg(8)->Arg(32);

void BM_PosteriorUpdate(benchmark::State& state) {
  const auto grid = ParamGrid::uniform_gilbert_elliott(1, 0.1, 0.9, 0.1);
  Posterior post = Posterior::uniform(grid);
  std::int64_t n = 1;
  State obs = 0;
  for (auto _ : state) {
    post.update(grid, 0, 1, n, obs);
    n = n % 40 + 1;
    obs ^= 1;
  }
}
BENCHMARK(BM_PosteriorUpdate);

void BM_TsdeRun(benchmark::State& state) {
  const auto grid = ParamGrid::uniform_gilbert_elliott(4, 0.1, 0.9, 0.1);
  const auto theta = channels(4);
  const PolicyMapper mapper(static_cast<PolicyMappingId>(state.range(0)), MapperOptions{98});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const TsdeConfig cfg{grid, Posterior::uniform(grid), theta, {1, 1, 1, 1}, 2, 10'000, 7, seed++, 0, false};
    benchmark::DoNotOptimize(run_tsde(cfg, mapper));
  }
  state.SetLabel(std::string(to_string(mapper.id())));
}
BENCHMARK(BM_TsdeRun)
    ->Arg(static_cast<int>(PolicyMappingId::kMyopic))
    ->Arg(static_cast<int>(PolicyMappingId::kWhittle))
    ->Unit(benchmark::kMillisecond);

void BM_OracleVi(benchmark::State& state) {
  const auto theta = channels(2);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_vi_policy(theta, 1, state.range(0), 1e-9));
}
BENCHMARK(BM_OracleVi)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
