#include "lookout/planner.hpp"
#include "lookout/sim.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace lookout;

namespace {

CostTable random_table(int actions, int contingents, int futures, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  CostTable t;
  t.action.assign(static_cast<std::size_t>(actions), std::vector<double>(static_cast<std::size_t>(futures)));
  t.contingent.assign(static_cast<std::size_t>(actions),
                      std::vector<std::vector<double>>(static_cast<std::size_t>(contingents),
                                                       std::vector<double>(static_cast<std::size_t>(futures))));
  for (auto& row : t.action)
    for (double& v : row) v = u(rng);
  for (auto& a : t.contingent)
    for (auto& row : a)
      for (double& v : row) v = u(rng);
  return t;
}

std::vector<double> uniform(int k) { return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k); }

// Argument: number of futures.
void BM_PlanContingent(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const CostTable t = random_table(50, 50, k, 1);
  const auto p = uniform(k);
  for (auto _ : state) benchmark::DoNotOptimize(plan_contingent(t, p));
}
BENCHMARK(BM_PlanContingent)->Arg(1)->Arg(5)->Arg(15);

void BM_PlanExpected(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const CostTable t = random_table(50, 50, k, 1);
  const auto p = uniform(k);
  for (auto _ : state) benchmark::DoNotOptimize(plan_expected(t, p));
}
BENCHMARK(BM_PlanExpected)->Arg(1)->Arg(5)->Arg(15);

// Candidates and the full cost table for a fork scene against K copies of
// its recorded future.
void BM_BuildProblem(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const ForecastSample s = generate_dataset(Family::kUnprotectedLeft, 1, 3).samples[0];
  FutureSet f;
  ScenePrediction p;
  p.xy = s.future;
  f.futures.assign(static_cast<std::size_t>(k), p);
  f.set_uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_problem(s.scene, f, SamplerConfig::desk(), CostWeights(), CostConfig()));
  }
}
BENCHMARK(BM_BuildProblem)->Arg(1)->Arg(15)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
