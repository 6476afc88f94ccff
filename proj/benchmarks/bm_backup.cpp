#include "cpmdp/gridworld.hpp"
#include "cpmdp/solvers.hpp"
#include "cpmdp/transition.hpp"

#include <benchmark/benchmark.h>

using namespace cpmdp;

namespace {

GridSpec square(std::int64_t side) {
    const auto n = static_cast<std::uint64_t>(side);
    return generate_random_spec(GridShape({n, n}), n * n / 100, 4, 1);
}

void BM_BuildModels(benchmark::State& state) {
    const auto spec = square(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_models(spec));
    state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_BuildModels)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oN);

void BM_ComponentBackup(benchmark::State& state) {
    const auto m = build_models(square(state.range(0)));
    const auto v = initial_values(m.rewards);
    const SolverConfig cfg;
    MultiplyCounter mults;
    for (auto _ : state) benchmark::DoNotOptimize(bellman_backup(m.components, m.rewards, v, cfg, &mults));
    state.counters["multiplies/backup"] =
        benchmark::Counter(static_cast<double>(mults.value()) / static_cast<double>(state.iterations()));
    state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_ComponentBackup)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oN);

void BM_TabularBackup(benchmark::State& state) {
    const auto m = build_models(square(state.range(0)));
    const auto tm = to_tabular(m.components);
    const auto v = initial_values(m.rewards);
    const SolverConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(bellman_backup(tm, m.rewards, v, cfg));
    state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_TabularBackup)->RangeMultiplier(2)->Range(16, 64)->Complexity(benchmark::oNSquared);

void BM_ValueIteration(benchmark::State& state) {
    const auto m = build_models(square(state.range(0)));
    const SolverConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(value_iteration(m.components, m.rewards, cfg));
}
BENCHMARK(BM_ValueIteration)->Arg(70)->Unit(benchmark::kMillisecond);

void BM_PolicyIteration(benchmark::State& state) {
    const auto m = build_models(square(state.range(0)));
    const SolverConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(policy_iteration(m.components, m.rewards, cfg));
}
BENCHMARK(BM_PolicyIteration)->Arg(70)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
