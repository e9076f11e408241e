// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/dataset.hpp"
#include "nlfv/decoder.hpp"
#include "nlfv/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nlfv {

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 100;
    /// Weight of the spatial-stage reconstruction term.
    double lambda_spatial = 1.0;
    /// Weight of the full (spatial + temporal) reconstruction term.
    double lambda_full = 1.0;
    bool temporal = true;
    /// false trains with uniform blend weights (occlusion ablation).
    bool occlusion = true;
    float kappa = 50.0f;
    std::uint64_t seed = 0;
    /// Write a checkpoint every N epochs to checkpoint_path (0 disables).
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_path;
    /// CSV training log written after every epoch when set.
    std::filesystem::path log_path;
    int max_spatial_neighbors = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
    int epoch = 0;
    double loss_total = 0.0;
    double loss_spatial = 0.0;
    double loss_full = 0.0;
    double seconds = 0.0;
    bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::int64_t adam_steps = 0;
    /// Every observation index read while training.
    std::set<GridIndex> touched;
    /// Mean L2 of full renders at the holdout coordinates, if any.
    std::optional<double> holdout_mse;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Mean absolute per-pixel difference.
Tensor l1_loss(Graph* graph, const Tensor& prediction, const Tensor& target);

/// A trained scene: geometry decoder plus optional color-regression decoder
/// and the split it was trained on.
struct Model {
    Decoder geometry;
    std::optional<Decoder> color;
    std::string scene;
    int width = 0;
    int height = 0;
    std::set<GridIndex> holdout;
    TrainConfig train_config;

    /// Throws LoadError if the model cannot render this dataset.
    void check_compatible(const LightFieldDataset& dataset) const;
};

Checkpoint model_to_checkpoint(const Model& model);
Model model_from_checkpoint(const Checkpoint& checkpoint);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
    Decoder decoder;
    TrainLog log;
};

/// Self-supervised training of a geometry decoder on split.train. Holdout
/// images are never read.
TrainResult train(const LightFieldDataset& dataset, const HoldoutSplit& split, const DecoderConfig& decoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Direct color regression: a Color-mode decoder fit to L(y) at every
/// training coordinate. Baseline for the no-warp mode.
TrainResult train_color(const LightFieldDataset& dataset, const HoldoutSplit& split,
                        const DecoderConfig& decoder_config, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

} // namespace nlfv
