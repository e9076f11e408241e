// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/ops.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace nlfv {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v));
}

void BM_Conv2dSame(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    const int size = static_cast<int>(state.range(1));
    const Tensor x = random_tensor({channels + 2, size, size}, 1);
    const Tensor k = random_tensor({channels, channels + 2, 3, 3}, 2);
    const Tensor b = random_tensor({channels}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ops::conv2d_same(nullptr, x, k, b));
    }
}
BENCHMARK(BM_Conv2dSame)->Args({8, 64})->Args({32, 32})->Args({64, 16});

void BM_Conv2dSameBackward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Tensor x = random_tensor({18, size, size}, 1);
    Tensor k = random_tensor({16, 18, 3, 3}, 2);
    Tensor b = random_tensor({16}, 3);
    x.set_requires_grad(true);
    k.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        Graph graph;
        const Tensor loss = ops::reduce_mean_abs(&graph, ops::conv2d_same(&graph, x, k, b));
        graph.backward(loss);
    }
}
BENCHMARK(BM_Conv2dSameBackward)->Arg(32)->Arg(64);

void BM_GridSample(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Tensor image = random_tensor({4, size, size}, 4);
    std::vector<float> coords(2 * size * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            coords[y * size + x] = x + 0.3f;
            coords[size * size + y * size + x] = y - 0.6f;
        }
    const Tensor grid({2, size, size}, coords);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ops::grid_sample_bilinear(nullptr, image, grid));
    }
}
BENCHMARK(BM_GridSample)->Arg(64)->Arg(256);

} // namespace
} // namespace nlfv
