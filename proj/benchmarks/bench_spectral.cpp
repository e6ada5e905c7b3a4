#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>

#include "endogede/spectral.hpp"

using namespace endogede;

static void BM_eigenvalues_of(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(5);
    Tensor w = rand_normal(rng, Shape{n, n}, 0.0, 0.1);
    for (auto _ : state) {
        EigenSpectrum s = eigenvalues_of(w);
        benchmark::DoNotOptimize(s.values.data());
    }
}
BENCHMARK(BM_eigenvalues_of)->Arg(64)->Arg(128);

static void BM_fix_finger_2000(benchmark::State& state) {
    Rng rng(6);
    std::vector<double> vals;
    for (int i = 0; i < 2000; ++i) vals.push_back(std::pow(1.0 - rng.uniform(), -1.0 / 1.5));
    std::sort(vals.begin(), vals.end());
    EigenSpectrum s;
    s.values = vals;
    double peak = peak_lambda(s);
    for (auto _ : state) {
        SpectralFit fit = fix_finger(s, 0.95 * peak, 1.5 * peak, peak);
        benchmark::DoNotOptimize(fit.tau);
    }
}
BENCHMARK(BM_fix_finger_2000);

static void BM_allocate_experts(benchmark::State& state) {
    Rng rng(7);
    std::vector<double> taus;
    for (int b = 0; b < 12; ++b) taus.push_back(1.0 + rng.uniform(0.1, 5.0));
    for (auto _ : state) {
        AllocationPlan p = allocate_experts(taus, 55);
        benchmark::DoNotOptimize(p.per_block.data());
    }
}
BENCHMARK(BM_allocate_experts);
