#include <benchmark/benchmark.h>

#include "endogede/image_ops.hpp"
#include "endogede/tensor.hpp"

using namespace endogede;

static void BM_matmul_forward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = rand_uniform(rng, Shape{n, n}, -1, 1);
    Tensor b = rand_uniform(rng, Shape{n, n}, -1, 1);
    for (auto _ : state) {
        Tensor out = matmul(a, b);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_matmul_forward)->Arg(32)->Arg(64)->Arg(128);

static void BM_matmul_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = rand_uniform(rng, Shape{n, n}, -1, 1);
    Tensor b = rand_uniform(rng, Shape{n, n}, -1, 1);
    a.set_requires_grad();
    b.set_requires_grad();
    for (auto _ : state) {
        a.zero_grad();
        b.zero_grad();
        Tape tape;
        Tensor loss = mean(square(matmul(a, b)));
        tape.backward(loss);
        benchmark::DoNotOptimize(a.grad_data());
    }
}
BENCHMARK(BM_matmul_backward)->Arg(32)->Arg(64);

static void BM_bilinear_sample(benchmark::State& state) {
    Rng rng(2);
    Tensor img = rand_uniform(rng, Shape{64, 80, 3});
    Tensor flow = rand_uniform(rng, Shape{64, 80, 2}, -2, 2);
    Tensor coords = add(identity_grid(64, 80), flow);
    for (auto _ : state) {
        SampleResult s = bilinear_sample(img, coords);
        benchmark::DoNotOptimize(s.values.data());
    }
}
BENCHMARK(BM_bilinear_sample);

static void BM_avg_pool3x3(benchmark::State& state) {
    Rng rng(3);
    Tensor img = rand_uniform(rng, Shape{64, 80, 3});
    for (auto _ : state) {
        Tensor out = avg_pool3x3(img);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_avg_pool3x3);

BENCHMARK_MAIN();
