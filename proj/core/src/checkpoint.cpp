// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/checkpoint.hpp"

#include "nlfv/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nlfv {
namespace {

constexpr std::string_view kMagic = "NLFV1\n";

void append_le_floats(std::string& out, std::span<const float> values) {
    const std::size_t offset = out.size();
    out.resize(offset + values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
        unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                  static_cast<unsigned char>((bits >> 8) & 0xff),
                                  static_cast<unsigned char>((bits >> 16) & 0xff),
                                  static_cast<unsigned char>((bits >> 24) & 0xff)};
        std::memcpy(out.data() + offset + i * 4, bytes, 4);
    }
}

std::string next_line(const std::string& bytes, std::size_t& pos, const std::string& source) {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) {
        throw LoadError(source + ": truncated checkpoint header");
    }
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return line;
}

} // namespace

const Tensor& Checkpoint::at(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) {
            return t.tensor;
        }
    }
    throw LoadError("checkpoint has no tensor named '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
    std::string out(kMagic);
    out += "config " + checkpoint.config.dump() + "\n";
    out += "tensors " + std::to_string(checkpoint.tensors.size()) + "\n";
    for (const auto& t : checkpoint.tensors) {
        if (t.name.empty() || t.name.find_first_of(" \n\t") != std::string::npos) {
            throw UsageError("checkpoint tensor name must be non-empty without whitespace: '" + t.name + "'");
        }
        out += t.name + " " + std::to_string(t.tensor.rank());
        for (int d : t.tensor.shape()) {
            out += " " + std::to_string(d);
        }
        out += "\n";
    }
    out += "data\n";
    for (const auto& t : checkpoint.tensors) {
        append_le_floats(out, t.tensor.values());
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
    if (bytes.compare(0, kMagic.size(), kMagic) != 0) {
        throw LoadError(source + ": not an NLFV1 checkpoint (bad magic)");
    }
    std::size_t pos = kMagic.size();
    Checkpoint ckpt;

    const std::string config_line = next_line(bytes, pos, source);
    if (config_line.rfind("config ", 0) != 0) {
        throw LoadError(source + ": expected 'config' line");
    }
    try {
        ckpt.config = nlohmann::json::parse(config_line.substr(7));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(source + ": malformed config JSON: " + e.what());
    }

    const std::string count_line = next_line(bytes, pos, source);
    std::size_t count = 0;
    {
        std::istringstream in(count_line);
        std::string tag;
        if (!(in >> tag >> count) || tag != "tensors") {
            throw LoadError(source + ": expected 'tensors <count>' line");
        }
    }

    std::vector<std::pair<std::string, Shape>> manifest;
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream in(next_line(bytes, pos, source));
        std::string name;
        std::size_t rank = 0;
        if (!(in >> name >> rank)) {
            throw LoadError(source + ": malformed manifest entry " + std::to_string(i));
        }
        Shape shape(rank);
        for (auto& d : shape) {
            if (!(in >> d) || d < 0) {
                throw LoadError(source + ": malformed shape for tensor '" + name + "'");
            }
        }
        manifest.emplace_back(std::move(name), std::move(shape));
    }
    if (next_line(bytes, pos, source) != "data") {
        throw LoadError(source + ": expected 'data' marker");
    }

    for (auto& [name, shape] : manifest) {
        const std::size_t n = shape_numel(shape);
        if (pos + n * 4 > bytes.size()) {
            throw LoadError(source + ": truncated data for tensor '" + name + "'");
        }
        std::vector<float> values(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * 4);
            const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                       (static_cast<std::uint32_t>(b[2]) << 16) |
                                       (static_cast<std::uint32_t>(b[3]) << 24);
            values[i] = std::bit_cast<float>(bits);
        }
        pos += n * 4;
        ckpt.tensors.push_back({name, Tensor(shape, std::move(values))});
    }
    if (pos != bytes.size()) {
        throw LoadError(source + ": trailing bytes after tensor data");
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = encode_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw LoadError("failed writing checkpoint '" + path.string() + "'");
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_checkpoint(buf.str(), path.string());
}

} // namespace nlfv
