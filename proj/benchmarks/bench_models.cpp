#include "lookout/diverse_sampler.hpp"
#include "lookout/scorer.hpp"
#include "lookout/sim.hpp"

#include <benchmark/benchmark.h>

using namespace lookout;

namespace {

struct Models {
  ForecastModel decoder = ForecastModel::create({}, 1);
  DiverseSampler sampler = DiverseSampler::create({}, 2);
  Scorer scorer = Scorer::create({}, 3);
  ForecastSample sample = generate_dataset(Family::kUnprotectedLeft, 1, 4).samples[0];
};

const Models& models() {
  static const Models m;
  return m;
}

void BM_InferDiverse(benchmark::State& state) {
  const Models& m = models();
  for (auto _ : state) benchmark::DoNotOptimize(infer_diverse(m.sampler, m.decoder, m.sample.scene));
}
BENCHMARK(BM_InferDiverse)->Unit(benchmark::kMillisecond);

void BM_ForecastPrior(benchmark::State& state) {
  const Models& m = models();
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(forecast_prior(m.decoder, m.sample.scene, 15, rng));
}
BENCHMARK(BM_ForecastPrior)->Unit(benchmark::kMillisecond);

void BM_Score(benchmark::State& state) {
  const Models& m = models();
  FutureSet f = infer_diverse(m.sampler, m.decoder, m.sample.scene);
  for (auto _ : state) {
    m.scorer.score(m.sample.scene, f, m.decoder.config());
    benchmark::DoNotOptimize(f.probabilities.data());
  }
}
BENCHMARK(BM_Score)->Unit(benchmark::kMillisecond);

// Forecast, score and plan: one replanning step of the closed loop.
void BM_PlanningStep(benchmark::State& state) {
  const Models& m = models();
  const FutureProvider provider = model_provider({&m.decoder, &m.sampler, &m.scorer}, ForecastSource::kDiverse, 15, 6);
  for (auto _ : state) {
    const FutureSet f = provider(m.sample.scene, 0);
    const PlanningProblem prob = build_problem(m.sample.scene, f, SamplerConfig::desk(), CostWeights(), CostConfig());
    benchmark::DoNotOptimize(plan(PlannerKind::kContingency, prob.candidates, prob.table, f.probabilities));
  }
}
BENCHMARK(BM_PlanningStep)->Unit(benchmark::kMillisecond);

}  // namespace
