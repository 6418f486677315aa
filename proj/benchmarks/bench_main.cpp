#include <benchmark/benchmark.h>

#include <vector>

#include "losscost/cost_dist.hpp"
#include "losscost/howard.hpp"
#include "losscost/mc_sim.hpp"
#include "losscost/stationary.hpp"

using namespace losscost;

namespace {

// Three classes on a link whose size is the benchmark argument.
std::vector<TrafficClass> three_classes() {
  return {{2.0, 1.0, 1, 1}, {1.0, 0.5, 2, 2}, {0.5, 0.8, 3, 4}};
}

void BM_Stationary(benchmark::State& state) {
  const auto classes = three_classes();
  const auto space = enumerate_states(classes, FullSharing{static_cast<int>(state.range(0))});
  for (auto _ : state) benchmark::DoNotOptimize(stationary(space, classes).g);
  state.counters["states"] = static_cast<double>(space.size());
}
BENCHMARK(BM_Stationary)->Arg(10)->Arg(20)->Arg(40);

void BM_HowardExact(benchmark::State& state) {
  const auto classes = three_classes();
  const auto space = enumerate_states(classes, FullSharing{static_cast<int>(state.range(0))});
  const auto st = stationary(space, classes);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_howard_exact(space, classes, st.g, st.cost_rate).v.data());
  state.counters["states"] = static_cast<double>(space.size());
}
BENCHMARK(BM_HowardExact)->Arg(10)->Arg(20)->Arg(40);

void BM_ShadowGrid(benchmark::State& state) {
  const auto classes = three_classes();
  const auto space = enumerate_states(classes, FullSharing{10});
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(evolve_shadow_costs(space, classes, 1.0, steps).leakage);
}
BENCHMARK(BM_ShadowGrid)->Arg(256)->Arg(1024);

void BM_ClosedFormTotalCost(benchmark::State& state) {
  const auto classes = three_classes();
  const auto space = enumerate_states(classes, FullSharing{20});
  for (auto _ : state)
    benchmark::DoNotOptimize(total_cost_distribution(space, classes, 2.0).mean);
}
BENCHMARK(BM_ClosedFormTotalCost);

void BM_Simulate(benchmark::State& state) {
  const std::vector<TrafficClass> classes{{1.2, 1.0, 1, 1}, {0.6, 0.8, 2, 3}};
  const auto space = enumerate_states(classes, FullSharing{4});
  SimConfig config;
  config.horizon = 2.0;
  config.replications = static_cast<std::size_t>(state.range(0));
  config.warmup = 25.0;
  config.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(space, classes, config).events);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
