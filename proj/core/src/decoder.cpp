// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/decoder.hpp"

#include "nlfv/error.hpp"
#include "nlfv/ops.hpp"

#include <cmath>
#include <random>

namespace nlfv {

std::string to_string(DecoderMode mode) { return mode == DecoderMode::Color ? "color" : "geometry"; }

DecoderMode decoder_mode_from_string(const std::string& text) {
    if (text == "geometry") return DecoderMode::Geometry;
    if (text == "color") return DecoderMode::Color;
    throw ConfigError("unknown decoder mode '" + text + "'");
}

int DecoderConfig::stage_count() const {
    const int target = std::max(width, height);
    int stages = 0;
    int size = 2;
    while (size < target) {
        size *= 2;
        ++stages;
    }
    return stages;
}

int DecoderConfig::stage_channels(int stage) const {
    const int shift = std::min(stage - 1, 30);
    return std::max(base_channels >> shift, min_channels);
}

int DecoderConfig::raster_size() const { return 2 << stage_count(); }

void DecoderConfig::validate() const {
    if (width < 1 || height < 1) {
        throw ConfigError("decoder output size must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
    }
    if (std::max(width, height) > 8192) {
        throw ConfigError("decoder output size " + std::to_string(std::max(width, height)) +
                          " is not reachable (limit 8192)");
    }
    if (min_channels < 1 || base_channels < min_channels) {
        throw ConfigError("decoder needs base_channels >= min_channels >= 1");
    }
    if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) {
        throw ConfigError("leaky slope must lie in [0,1)");
    }
}

nlohmann::json DecoderConfig::to_json() const {
    return {{"width", width},
            {"height", height},
            {"base_channels", base_channels},
            {"min_channels", min_channels},
            {"mode", to_string(mode)},
            {"leaky_slope", leaky_slope},
            {"seed", seed}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
    DecoderConfig c;
    try {
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.min_channels = j.at("min_channels").get<int>();
        c.mode = decoder_mode_from_string(j.at("mode").get<std::string>());
        c.leaky_slope = j.at("leaky_slope").get<float>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed decoder config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

constexpr int kCoordChannels = 2;

// Parameter layout shared by init, from_tensors and parameter_count.
std::vector<std::pair<std::string, Shape>> parameter_layout(const DecoderConfig& c) {
    std::vector<std::pair<std::string, Shape>> layout;
    layout.push_back({"fc.weight", {4 * c.base_channels, 3}});
    layout.push_back({"fc.bias", {4 * c.base_channels}});
    int in = c.base_channels;
    for (int s = 1; s <= c.stage_count(); ++s) {
        const int out = c.stage_channels(s);
        layout.push_back({"stage" + std::to_string(s) + ".weight", {out, in + kCoordChannels, 3, 3}});
        layout.push_back({"stage" + std::to_string(s) + ".bias", {out}});
        in = out;
    }
    layout.push_back({"out.weight", {3, in + kCoordChannels, 3, 3}});
    layout.push_back({"out.bias", {3}});
    return layout;
}

Tensor coord_grid(int size) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<float> v(2 * plane);
    auto norm = [size](int i) {
        return size > 1 ? static_cast<float>(-1.0 + 2.0 * i / (size - 1)) : 0.0f;
    };
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            v[static_cast<std::size_t>(y) * size + x] = norm(x);
            v[plane + static_cast<std::size_t>(y) * size + x] = norm(y);
        }
    }
    return Tensor({2, size, size}, std::move(v));
}

} // namespace

std::size_t parameter_count(const DecoderConfig& config) {
    config.validate();
    std::size_t n = 0;
    for (const auto& [name, shape] : parameter_layout(config)) {
        n += shape_numel(shape);
    }
    return n;
}

Decoder::Decoder(DecoderConfig config, std::vector<NamedTensor> params)
    : config_(std::move(config)), params_(std::move(params)) {
    for (int size = 2; size <= config_.raster_size(); size *= 2) {
        coord_channels_.push_back(coord_grid(size));
    }
}

Decoder Decoder::init(const DecoderConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::vector<NamedTensor> params;
    for (const auto& [name, shape] : parameter_layout(config)) {
        const bool is_bias = name.ends_with(".bias");
        std::vector<float> values(shape_numel(shape), 0.0f);
        if (!is_bias) {
            const std::size_t fan_in = shape_numel(shape) / static_cast<std::size_t>(shape[0]);
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : values) {
                v = static_cast<float>(dist(rng));
            }
        }
        params.push_back({name, Tensor(shape, std::move(values), true)});
    }
    return Decoder(config, std::move(params));
}

Decoder Decoder::from_tensors(const DecoderConfig& config, std::vector<NamedTensor> params) {
    config.validate();
    const auto layout = parameter_layout(config);
    if (params.size() != layout.size()) {
        throw LoadError("decoder expects " + std::to_string(layout.size()) + " tensors, got " +
                        std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (params[i].name != layout[i].first || params[i].tensor.shape() != layout[i].second) {
            throw LoadError("decoder tensor " + std::to_string(i) + " is '" + params[i].name + "' " +
                            shape_string(params[i].tensor.shape()) + ", expected '" + layout[i].first + "' " +
                            shape_string(layout[i].second));
        }
        params[i].tensor.set_requires_grad(true);
    }
    return Decoder(config, std::move(params));
}

std::vector<Tensor> Decoder::parameters() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) {
        out.push_back(p.tensor);
    }
    return out;
}

std::size_t Decoder::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.tensor.numel();
    }
    return n;
}

Tensor Decoder::decode(const LFCoordinate& x, Graph* graph) const {
    require_in_unit_cube(x);
    const float slope = config_.leaky_slope;
    const Tensor coord({3}, {static_cast<float>(x.u), static_cast<float>(x.v), static_cast<float>(x.t)});

    Tensor h = ops::fully_connected(graph, coord, param(0), param(1));
    h = ops::leaky_relu(graph, h, slope);
    h = ops::reshape(graph, h, {config_.base_channels, 2, 2});
    {
        const Tensor parts[] = {h, coord_channels_[0]};
        h = ops::concat_channels(graph, parts);
    }

    const int stages = config_.stage_count();
    for (int s = 1; s <= stages; ++s) {
        h = ops::upsample_nearest_x2(graph, h);
        h = ops::conv2d_same(graph, h, param(2 * s), param(2 * s + 1));
        h = ops::leaky_relu(graph, h, slope);
        const Tensor parts[] = {h, coord_channels_[s]};
        h = ops::concat_channels(graph, parts);
    }

    h = ops::conv2d_same(graph, h, param(2 * stages + 2), param(2 * stages + 3));
    h = ops::crop_center(graph, h, config_.height, config_.width);
    return ops::sigmoid(graph, h);
}

} // namespace nlfv
