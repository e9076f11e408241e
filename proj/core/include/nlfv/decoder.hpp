// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/checkpoint.hpp"
#include "nlfv/dataset.hpp"
#include "nlfv/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nlfv {

enum class DecoderMode {
    /// Three channels: disparity-depth, encoded flow u, encoded flow v.
    Geometry,
    /// Three channels read directly as RGB (direct color regression ablation).
    Color,
};

std::string to_string(DecoderMode mode);
DecoderMode decoder_mode_from_string(const std::string& text);

struct DecoderConfig {
    int width = 64;
    int height = 64;
    int base_channels = 128;
    int min_channels = 8;
    DecoderMode mode = DecoderMode::Geometry;
    float leaky_slope = 0.2f;
    std::uint64_t seed = 0;

    /// Number of resolution doublings from 2x2 to reach max(width, height).
    int stage_count() const;
    /// Output channels of stage s (1-based): base >> (s-1), floored at min.
    int stage_channels(int stage) const;
    /// Side of the square raster the doubling chain produces before cropping.
    int raster_size() const;

    void validate() const;

    nlohmann::json to_json() const;
    static DecoderConfig from_json(const nlohmann::json& j);
};

/// Closed-form number of scalars in the decoder's parameters.
std::size_t parameter_count(const DecoderConfig& config);

/// Coordinate-conditioned generator: (u,v,t) -> 3 x H x W map in (0,1).
///
/// A fully connected layer lifts the coordinate to a base_channels x 2 x 2
/// image; each stage doubles the resolution (nearest upsample, 3x3 conv,
/// leaky ReLU) and appends two coord-conv channels holding the normalized
/// pixel position. A last 3x3 conv and a sigmoid produce the output, which is
/// center-cropped to the target size. The decoder never sees pixel
/// observations: its only inputs are the coordinate and its weights.
class Decoder {
  public:
    /// He-uniform weights (bound sqrt(6 / fan_in)) and zero biases.
    static Decoder init(const DecoderConfig& config);
    static Decoder from_tensors(const DecoderConfig& config, std::vector<NamedTensor> params);

    const DecoderConfig& config() const { return config_; }

    /// Pure function of (weights, coordinate); safe to call concurrently when
    /// `graph` is null or private to the caller.
    Tensor decode(const LFCoordinate& x, Graph* graph = nullptr) const;

    std::vector<NamedTensor>& named_parameters() { return params_; }
    const std::vector<NamedTensor>& named_parameters() const { return params_; }
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;

  private:
    Decoder(DecoderConfig config, std::vector<NamedTensor> params);
    const Tensor& param(std::size_t index) const { return params_[index].tensor; }

    DecoderConfig config_;
    std::vector<NamedTensor> params_;
    std::vector<Tensor> coord_channels_;
};

} // namespace nlfv
