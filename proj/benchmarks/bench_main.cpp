#include <random>

#include <benchmark/benchmark.h>

#include "mfdr/mfdr.hpp"

namespace {

using namespace mfdr;

Dataset met_dataset(Family family) {
    return sim::generate(sim::ScenarioSpec::assumptions_met(family, 3)).data;
}

Dataset violated_dataset(Family family) {
    return sim::generate(sim::ScenarioSpec::assumptions_violated(family, 3)).data;
}

void BM_FitPath(benchmark::State& state, Family family, bool met) {
    const Dataset data = met ? met_dataset(family) : violated_dataset(family);
    const LambdaGrid grid = lambda_grid(data, family, 100);
    for (auto _ : state) {
        PathFit fit = fit_path(data, family, grid);
        benchmark::DoNotOptimize(fit.fitted);
    }
}
BENCHMARK_CAPTURE(BM_FitPath, linear_met, Family::Linear, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FitPath, linear_violated, Family::Linear, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FitPath, logistic_violated, Family::Logistic, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FitPath, cox_violated, Family::Cox, false)->Unit(benchmark::kMillisecond);

void BM_MixtureEM(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> z(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = i % 10 == 0 ? 4.0 * g(rng) : g(rng);
    for (auto _ : state) {
        MixtureModel m = fit_mixture_em(z);
        benchmark::DoNotOptimize(m.pi0);
    }
}
BENCHMARK(BM_MixtureEM)->Arg(600)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_CrossValidate(benchmark::State& state) {
    const Dataset data = violated_dataset(Family::Linear);
    const LambdaGrid grid = lambda_grid(data, Family::Linear, 100);
    for (auto _ : state) {
        CvResult cv = cross_validate(data, Family::Linear, grid);
        benchmark::DoNotOptimize(cv.index_cv);
    }
}
BENCHMARK(BM_CrossValidate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
