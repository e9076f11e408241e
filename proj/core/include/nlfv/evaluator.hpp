// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/dataset.hpp"
#include "nlfv/decoder.hpp"
#include "nlfv/pipeline.hpp"
#include "nlfv/synthetic.hpp"
#include "nlfv/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nlfv {

struct EvalRow {
    std::string method;
    GridIndex index;
    LFCoordinate coordinate;
    double l2 = 0.0;
    double dssim = 0.0;
    double psnr = 0.0;
    bool operator==(const EvalRow&) const = default;
};

struct MethodSummary {
    std::string method;
    std::size_t count = 0;
    double mean_l2 = 0.0;
    double mean_dssim = 0.0;
    double mean_psnr = 0.0;
    bool operator==(const MethodSummary&) const = default;
};

struct TimingStats {
    std::size_t samples = 0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    double stddev_ms = 0.0;
    double mean_decode_ms = 0.0;
    double mean_warp_ms = 0.0;
    bool operator==(const TimingStats&) const = default;
};

struct EvalReport {
    std::string scene;
    std::uint64_t seed = 0;
    std::vector<EvalRow> rows;
    std::optional<TimingStats> timing;

    /// Per-method means, in first-appearance order.
    std::vector<MethodSummary> summary() const;
    MethodSummary method(const std::string& name) const;

    /// One row per method x coordinate, preceded by a '#' header line.
    std::string to_csv() const;
    static EvalReport from_csv(std::string_view text);
    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    /// "<scene>_seed<seed>", used to name report files.
    std::string file_stem() const;

    bool operator==(const EvalReport&) const = default;
};

/// Renders every holdout coordinate with every method and compares against
/// the withheld observation. context.views must exclude the whole holdout.
EvalReport evaluate_holdout(const LightFieldDataset& dataset, const std::set<GridIndex>& holdout,
                            const RenderContext& context, std::span<const RenderMode> methods,
                            std::uint64_t seed = 0);

struct SweepOptions {
    std::vector<int> grids{3, 5};
    DecoderConfig decoder;
    TrainConfig train;
};

struct SweepEntry {
    int grid = 0;
    GridIndex target;
    double l2 = 0.0;
    double dssim = 0.0;
    double train_seconds = 0.0;
};

/// For each grid density: regenerate the scene, hold out the center view,
/// train from scratch and evaluate the full render at that view.
std::vector<SweepEntry> sparsity_sweep(const SceneSpec& spec, const SweepOptions& options);

/// Wall-clock statistics of n full renders at seeded random coordinates.
TimingStats bench_render(const RenderContext& context, int n, std::uint64_t seed = 0);

} // namespace nlfv
