// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/image.hpp"

#include "nlfv/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nlfv {

Image::Image(int w, int h, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(kChannels) * w * h, fill) {
    if (w < 0 || h < 0) {
        throw ConfigError("image dimensions must be non-negative");
    }
}

Tensor to_tensor(const Image& image) {
    return Tensor({Image::kChannels, image.height, image.width}, image.data);
}

Image to_image(const Tensor& tensor) {
    if (tensor.rank() != 3 || tensor.dim(0) != Image::kChannels) {
        throw ConfigError("to_image: expected a 3 x H x W tensor, got " + shape_string(tensor.shape()));
    }
    Image img(tensor.dim(2), tensor.dim(1));
    const auto v = tensor.values();
    std::transform(v.begin(), v.end(), img.data.begin(), [](float x) { return std::clamp(x, 0.0f, 1.0f); });
    return img;
}

namespace {

unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::string_view bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t begin = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
    }
    return std::string(bytes.substr(begin, pos - begin));
}

int header_int(std::string_view bytes, std::size_t& pos, const std::string& source, const char* what) {
    const std::string tok = header_token(bytes, pos);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        throw LoadError(source + ": corrupt PPM header (bad " + what + " '" + tok + "')");
    }
    return std::stoi(tok);
}

} // namespace

std::string encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + image.pixel_count() * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::size_t p = header + (static_cast<std::size_t>(y) * image.width + x) * 3;
            for (int c = 0; c < 3; ++c) {
                out[p + c] = static_cast<char>(to_byte(image.at(c, y, x)));
            }
        }
    }
    return out;
}

Image decode_ppm(std::string_view bytes, const std::string& source) {
    std::size_t pos = 0;
    if (header_token(bytes, pos) != "P6") {
        throw LoadError(source + ": corrupt PPM header (expected P6 magic)");
    }
    const int w = header_int(bytes, pos, source, "width");
    const int h = header_int(bytes, pos, source, "height");
    const int maxval = header_int(bytes, pos, source, "maxval");
    if (maxval != 255) {
        throw LoadError(source + ": unsupported PPM maxval " + std::to_string(maxval) + " (need 255)");
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw LoadError(source + ": corrupt PPM header (missing separator before raster)");
    }
    ++pos;
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - pos < need) {
        throw LoadError(source + ": truncated PPM raster (" + std::to_string(bytes.size() - pos) + " of " +
                        std::to_string(need) + " bytes)");
    }
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = pos + (static_cast<std::size_t>(y) * w + x) * 3;
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = static_cast<float>(static_cast<unsigned char>(bytes[p + c])) / 255.0f;
            }
        }
    }
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
    const std::string bytes = encode_ppm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("missing view file '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_ppm(buf.str(), path.string());
}

Image quantize8(const Image& image) {
    Image out = image;
    for (float& v : out.data) {
        v = static_cast<float>(to_byte(v)) / 255.0f;
    }
    return out;
}

} // namespace nlfv
