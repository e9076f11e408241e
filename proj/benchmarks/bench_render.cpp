// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/decoder.hpp"
#include "nlfv/pipeline.hpp"
#include "nlfv/synthetic.hpp"

#include <benchmark/benchmark.h>

namespace nlfv {
namespace {

void BM_Decode(benchmark::State& state) {
    DecoderConfig dc;
    dc.width = static_cast<int>(state.range(0));
    dc.height = dc.width;
    const Decoder decoder = Decoder::init(dc);
    for (auto _ : state) {
        benchmark::DoNotOptimize(decoder.decode({0.3, 0.6, 0.1}, nullptr));
    }
}
BENCHMARK(BM_Decode)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RenderFull(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const LightFieldDataset ds = generate_synthetic(moving_layer_scene(size, 3, 3));
    ViewSet views(ds, {});
    DecoderConfig dc;
    dc.width = size;
    dc.height = size;
    const Decoder decoder = Decoder::init(dc);
    const DecoderGeometry geometry(decoder);
    const RenderContext ctx{&views, &geometry, nullptr};
    double decode = 0.0;
    double warp = 0.0;
    for (auto _ : state) {
        RenderTiming timing;
        benchmark::DoNotOptimize(render(ctx, {0.37, 0.52, 0.3}, RenderMode{}, &timing));
        decode += timing.decode_seconds;
        warp += timing.warp_seconds;
    }
    state.counters["decode_ms"] = benchmark::Counter(decode * 1e3, benchmark::Counter::kAvgIterations);
    state.counters["warp_ms"] = benchmark::Counter(warp * 1e3, benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_RenderFull)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Blend(benchmark::State& state) {
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(64, 3));
    ViewSet views(ds, {});
    for (auto _ : state) {
        benchmark::DoNotOptimize(blend_views(views, {0.37, 0.52, 0.0}));
    }
}
BENCHMARK(BM_Blend);

} // namespace
} // namespace nlfv
