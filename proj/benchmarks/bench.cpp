#include <benchmark/benchmark.h>

#include "tempcal/calibrators.hpp"
#include "tempcal/harness.hpp"
#include "tempcal/metrics.hpp"
#include "tempcal/temporal.hpp"

namespace {

tempcal::Dataset make_data(std::size_t n, std::uint64_t seed = 7) {
  tempcal::SyntheticSpec spec;
  spec.n = n;
  spec.truth = tempcal::PlantedTemperature{1.6};
  spec.seed = seed;
  return tempcal::generate_synthetic(spec);
}

void BM_Evaluate(benchmark::State& state) {
  const tempcal::Dataset ds = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tempcal::evaluate(ds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(10000)->Arg(100000);

void BM_FitTemperature(benchmark::State& state) {
  const tempcal::Dataset ds = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tempcal::fit_temperature(ds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitTemperature)->Arg(10000)->Arg(100000);

void BM_FitPlatt(benchmark::State& state) {
  const tempcal::Dataset ds = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tempcal::fit_platt(ds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitPlatt)->Arg(10000);

void BM_FitContinuous(benchmark::State& state) {
  tempcal::SyntheticSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  spec.truth = tempcal::PlantedSchedule{};
  spec.seed = 11;
  const tempcal::Dataset ds = tempcal::generate_synthetic(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tempcal::fit_continuous(ds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitContinuous)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ApplySchedule(benchmark::State& state) {
  const tempcal::Dataset ds = make_data(static_cast<std::size_t>(state.range(0)));
  tempcal::ContinuousTemporalCalibrator cal;
  cal.schedule = tempcal::ExponentialTemperature{0.8, 1.2, 1.9, 0.1, 30.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(tempcal::apply_dataset(cal, ds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplySchedule)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
