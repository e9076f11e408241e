// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/tensor.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nlfv {

/// Three-channel color raster, planar (channel-major), values in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    static constexpr int kChannels = 3;

    Image() = default;
    Image(int w, int h, float fill = 0.0f);

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const Image&) const = default;
};

Tensor to_tensor(const Image& image);
/// Copies a 3 x H x W tensor into an Image, clamping to [0,1].
Image to_image(const Tensor& tensor);

/// Binary PPM (P6, maxval 255). Values are quantized with round-to-nearest.
std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes, const std::string& source = "<memory>");
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level, as a PPM write/read would.
Image quantize8(const Image& image);

} // namespace nlfv
