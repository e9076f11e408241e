// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/synthetic.hpp"

#include "nlfv/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace nlfv {

void SceneSpec::validate() const {
    if (width < 1 || height < 1) {
        throw SpecError("scene size must be positive");
    }
    if (grid_m < 1 || grid_n < 1 || frames < 1) {
        throw SpecError("grid and frame counts must be >= 1");
    }
    if (!(disparity_scale > 0.0)) {
        throw SpecError("disparity_scale must be > 0");
    }
    if (!(flow_scale >= 0.0)) {
        throw SpecError("flow_scale must be >= 0");
    }
    if (layers.empty()) {
        throw SpecError("scene needs at least one layer");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (!(l.disparity >= 0.0 && l.disparity <= 1.0)) {
            throw SpecError("layer " + std::to_string(i) + ": disparity must lie in [0,1]");
        }
        if (i > 0 && !(l.disparity > layers[i - 1].disparity)) {
            throw SpecError("layer " + std::to_string(i) +
                            ": disparities must increase strictly from far to near");
        }
        if (std::fabs(l.velocity_x) > flow_scale || std::fabs(l.velocity_y) > flow_scale) {
            throw SpecError("layer " + std::to_string(i) + ": velocity exceeds flow_scale " +
                            std::to_string(flow_scale));
        }
        if (!(l.texture_scale > 0.0)) {
            throw SpecError("layer " + std::to_string(i) + ": texture_scale must be > 0");
        }
        if (l.mask == MaskKind::Blob && !(l.blob_rx > 0.0 && l.blob_ry > 0.0)) {
            throw SpecError("layer " + std::to_string(i) + ": blob radii must be > 0");
        }
    }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hash01(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t salt) {
    std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(a) * 0x632be59bd9b4e019ULL));
    h = splitmix(h ^ (static_cast<std::uint64_t>(b) * 0x85157af5ULL) ^ (salt << 48));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smoothstep(double f) { return f * f * (3.0 - 2.0 * f); }

double value_noise(std::uint64_t seed, std::uint64_t salt, double x, double y, double cell) {
    const double gx = x / cell;
    const double gy = y / cell;
    const double fx0 = std::floor(gx);
    const double fy0 = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx0);
    const auto iy = static_cast<std::int64_t>(fy0);
    const double fx = smoothstep(gx - fx0);
    const double fy = smoothstep(gy - fy0);
    const double a = hash01(seed, ix, iy, salt);
    const double b = hash01(seed, ix + 1, iy, salt);
    const double c = hash01(seed, ix, iy + 1, salt);
    const double d = hash01(seed, ix + 1, iy + 1, salt);
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

double fractal_noise(std::uint64_t seed, std::uint64_t salt, double x, double y, double cell) {
    return 0.65 * value_noise(seed, salt, x, y, cell) + 0.35 * value_noise(seed, salt + 7, x, y, cell * 0.5);
}

std::uint64_t layer_seed(const SceneSpec& spec, const LayerSpec& layer, std::size_t index) {
    return splitmix(spec.seed * 1000003ULL + layer.texture_seed * 7919ULL + index);
}

// Texel value of a layer at integer texel coordinates.
std::array<float, 3> texel(const LayerSpec& layer, std::uint64_t seed, std::int64_t tx, std::int64_t ty) {
    const double x = static_cast<double>(tx);
    const double y = static_cast<double>(ty);
    std::array<float, 3> rgb{};
    switch (layer.texture) {
    case TextureKind::ValueNoise:
        for (int c = 0; c < 3; ++c) {
            rgb[c] = static_cast<float>(0.1 + 0.8 * fractal_noise(seed, c + 1, x, y, layer.texture_scale));
        }
        break;
    case TextureKind::Checkerboard: {
        const auto cell = std::max<std::int64_t>(1, std::llround(layer.texture_scale));
        const auto cx = tx >= 0 ? tx / cell : (tx - cell + 1) / cell;
        const auto cy = ty >= 0 ? ty / cell : (ty - cell + 1) / cell;
        const bool odd = ((cx + cy) & 1) != 0;
        for (int c = 0; c < 3; ++c) {
            const double base = hash01(seed, c, odd ? 1 : 0, 99);
            rgb[c] = static_cast<float>(odd ? 0.15 + 0.3 * base : 0.55 + 0.3 * base);
        }
        break;
    }
    case TextureKind::TintedNoise: {
        const double n = fractal_noise(seed, 11, x, y, layer.texture_scale);
        const double phase = 0.5 + 0.5 * std::sin(x / (4.0 * layer.texture_scale) + hash01(seed, 0, 0, 5) * 6.0);
        for (int c = 0; c < 3; ++c) {
            const double tint_a = 0.3 + 0.7 * hash01(seed, c, 1, 21);
            const double tint_b = 0.3 + 0.7 * hash01(seed, c, 2, 21);
            const double tint = tint_a * phase + tint_b * (1.0 - phase);
            rgb[c] = static_cast<float>(0.1 + 0.8 * n * tint);
        }
        break;
    }
    }
    return rgb;
}

// Bilinear lookup of the texel raster at continuous texel coordinates.
std::array<float, 3> sample_layer(const LayerSpec& layer, std::uint64_t seed, double sx, double sy) {
    const double fx0 = std::floor(sx);
    const double fy0 = std::floor(sy);
    const auto x0 = static_cast<std::int64_t>(fx0);
    const auto y0 = static_cast<std::int64_t>(fy0);
    const double fx = sx - fx0;
    const double fy = sy - fy0;
    const auto a = texel(layer, seed, x0, y0);
    const auto b = texel(layer, seed, x0 + 1, y0);
    const auto c = texel(layer, seed, x0, y0 + 1);
    const auto d = texel(layer, seed, x0 + 1, y0 + 1);
    std::array<float, 3> out{};
    for (int ch = 0; ch < 3; ++ch) {
        out[ch] = static_cast<float>((1 - fy) * ((1 - fx) * a[ch] + fx * b[ch]) + fy * ((1 - fx) * c[ch] + fx * d[ch]));
    }
    return out;
}

bool mask_covers(const LayerSpec& layer, std::uint64_t seed, double qx, double qy) {
    if (layer.mask == MaskKind::Full) {
        return true;
    }
    const double dx = qx - layer.blob_cx;
    const double dy = qy - layer.blob_cy;
    const double theta = std::atan2(dy, dx);
    const double phase = hash01(seed, 3, 3, 31) * 2.0 * std::numbers::pi;
    const double r = 1.0 + layer.blob_wobble * std::sin(3.0 * theta + phase);
    const double e = (dx / layer.blob_rx) * (dx / layer.blob_rx) + (dy / layer.blob_ry) * (dy / layer.blob_ry);
    return e <= r * r;
}

double effective_u(const SceneSpec& spec, const LFCoordinate& x) { return spec.grid_m <= 1 ? 0.5 : x.u; }
double effective_v(const SceneSpec& spec, const LFCoordinate& x) { return spec.grid_n <= 1 ? 0.5 : x.v; }
double frame_position(const SceneSpec& spec, const LFCoordinate& x) {
    return spec.frames <= 1 ? 0.0 : x.t * static_cast<double>(spec.frames - 1);
}

struct Raster {
    std::vector<int> owner;
    Image color;
};

Raster rasterize(const SceneSpec& spec, const LFCoordinate& x, bool with_color) {
    spec.validate();
    Raster r;
    r.owner.assign(static_cast<std::size_t>(spec.width) * spec.height, -1);
    if (with_color) {
        r.color = Image(spec.width, spec.height);
    }
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& layer = spec.layers[li];
        const auto seed = layer_seed(spec, layer, li);
        const LayerShift s = layer_shift(spec, layer, x);
        for (int py = 0; py < spec.height; ++py) {
            for (int px = 0; px < spec.width; ++px) {
                // Pixel centers sit at +0.5; texel t is centered at t + 0.5.
                const double qx = px + 0.5 - s.dx;
                const double qy = py + 0.5 - s.dy;
                if (!mask_covers(layer, seed, qx, qy)) {
                    continue;
                }
                const std::size_t p = static_cast<std::size_t>(py) * spec.width + px;
                r.owner[p] = static_cast<int>(li);
                if (with_color) {
                    const auto rgb = sample_layer(layer, seed, qx - 0.5, qy - 0.5);
                    for (int c = 0; c < 3; ++c) {
                        r.color.at(c, py, px) = rgb[c];
                    }
                }
            }
        }
    }
    return r;
}

TextureKind texture_from_string(const std::string& s) {
    if (s == "noise" || s == "value-noise") return TextureKind::ValueNoise;
    if (s == "checker" || s == "checkerboard") return TextureKind::Checkerboard;
    if (s == "tinted-noise") return TextureKind::TintedNoise;
    throw SpecError("unknown texture '" + s + "' (noise, checker, tinted-noise)");
}

std::string texture_to_string(TextureKind k) {
    switch (k) {
    case TextureKind::ValueNoise: return "noise";
    case TextureKind::Checkerboard: return "checker";
    case TextureKind::TintedNoise: return "tinted-noise";
    }
    return "noise";
}

} // namespace

LayerShift layer_shift(const SceneSpec& spec, const LayerSpec& layer, const LFCoordinate& x) {
    const double k = frame_position(spec, x);
    return {layer.disparity * spec.disparity_scale * (effective_u(spec, x) - 0.5) + layer.velocity_x * k,
            layer.disparity * spec.disparity_scale * (effective_v(spec, x) - 0.5) + layer.velocity_y * k};
}

Image render_view(const SceneSpec& spec, const LFCoordinate& x) { return rasterize(spec, x, true).color; }

std::vector<int> layer_map(const SceneSpec& spec, const LFCoordinate& x) { return rasterize(spec, x, false).owner; }

Tensor oracle_geometry(const SceneSpec& spec, const LFCoordinate& x) {
    const auto owner = layer_map(spec, x);
    const std::size_t plane = owner.size();
    std::vector<float> values(3 * plane, 0.5f);
    auto encode = [&](double velocity) {
        return spec.flow_scale > 0.0 ? static_cast<float>(0.5 * (velocity / spec.flow_scale + 1.0)) : 0.5f;
    };
    for (std::size_t p = 0; p < plane; ++p) {
        if (owner[p] < 0) {
            values[p] = 0.0f;
            continue;
        }
        const auto& layer = spec.layers[owner[p]];
        values[p] = static_cast<float>(layer.disparity);
        values[plane + p] = encode(layer.velocity_x);
        values[2 * plane + p] = encode(layer.velocity_y);
    }
    return Tensor({3, spec.height, spec.width}, std::move(values));
}

LightFieldDataset generate_synthetic(const SceneSpec& spec) {
    spec.validate();
    LightFieldDataset ds;
    ds.scene = spec.name;
    ds.grid_m = spec.grid_m;
    ds.grid_n = spec.grid_n;
    ds.frames = spec.frames;
    ds.width = spec.width;
    ds.height = spec.height;
    ds.disparity_scale = spec.disparity_scale;
    ds.flow_scale = spec.flow_scale;
    for (const auto& index : ds.all_indices()) {
        ds.images[index] = quantize8(render_view(spec, ds.coordinate(index)));
    }
    return ds;
}

SceneSpec scene_from_json(const nlohmann::json& j) {
    SceneSpec s;
    try {
        s.name = j.value("name", s.name);
        s.width = j.at("size").at(0).get<int>();
        s.height = j.at("size").at(1).get<int>();
        s.grid_m = j.at("grid").at(0).get<int>();
        s.grid_n = j.at("grid").at(1).get<int>();
        s.frames = j.value("frames", 1);
        s.disparity_scale = j.at("disparity_scale").get<double>();
        s.flow_scale = j.value("flow_scale", 0.0);
        s.seed = j.value("seed", std::uint64_t{1});
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.disparity = lj.at("disparity").get<double>();
            if (lj.contains("velocity")) {
                l.velocity_x = lj["velocity"].at(0).get<double>();
                l.velocity_y = lj["velocity"].at(1).get<double>();
            }
            l.texture = texture_from_string(lj.value("texture", std::string("noise")));
            l.texture_seed = lj.value("texture_seed", std::uint64_t{0});
            l.texture_scale = lj.value("texture_scale", 6.0);
            if (lj.contains("mask")) {
                const auto& m = lj["mask"];
                const std::string type = m.value("type", std::string("full"));
                if (type == "blob") {
                    l.mask = MaskKind::Blob;
                    l.blob_cx = m.at("center").at(0).get<double>();
                    l.blob_cy = m.at("center").at(1).get<double>();
                    l.blob_rx = m.at("radius").at(0).get<double>();
                    l.blob_ry = m.at("radius").at(1).get<double>();
                    l.blob_wobble = m.value("wobble", 0.0);
                } else if (type != "full") {
                    throw SpecError("unknown mask type '" + type + "' (full, blob)");
                }
            }
            s.layers.push_back(l);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed scene spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json scene_to_json(const SceneSpec& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["size"] = {s.width, s.height};
    j["grid"] = {s.grid_m, s.grid_n};
    j["frames"] = s.frames;
    j["disparity_scale"] = s.disparity_scale;
    j["flow_scale"] = s.flow_scale;
    j["seed"] = s.seed;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : s.layers) {
        nlohmann::json lj;
        lj["disparity"] = l.disparity;
        lj["velocity"] = {l.velocity_x, l.velocity_y};
        lj["texture"] = texture_to_string(l.texture);
        lj["texture_seed"] = l.texture_seed;
        lj["texture_scale"] = l.texture_scale;
        if (l.mask == MaskKind::Blob) {
            lj["mask"] = {{"type", "blob"},
                          {"center", {l.blob_cx, l.blob_cy}},
                          {"radius", {l.blob_rx, l.blob_ry}},
                          {"wobble", l.blob_wobble}};
        } else {
            lj["mask"] = {{"type", "full"}};
        }
        j["layers"].push_back(lj);
    }
    return j;
}

SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open scene spec '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(path + ": " + e.what());
    }
    return scene_from_json(j);
}

SceneSpec two_layer_scene(int size, int grid) {
    SceneSpec s;
    s.name = "two-layer";
    s.width = size;
    s.height = size;
    s.grid_m = grid;
    s.grid_n = grid;
    s.frames = 1;
    s.disparity_scale = 8.0;
    s.flow_scale = 0.0;
    s.seed = 7;

    LayerSpec back;
    back.disparity = 0.25;
    back.texture = TextureKind::ValueNoise;
    back.texture_seed = 1;
    back.texture_scale = 8.0;

    LayerSpec front;
    front.disparity = 1.0;
    front.texture = TextureKind::TintedNoise;
    front.texture_seed = 2;
    front.texture_scale = 5.0;
    front.mask = MaskKind::Blob;
    front.blob_cx = size * 0.5;
    front.blob_cy = size * 0.5;
    front.blob_rx = size * 0.24;
    front.blob_ry = size * 0.2;
    front.blob_wobble = 0.12;

    s.layers = {back, front};
    return s;
}

SceneSpec moving_layer_scene(int size, int grid, int frames) {
    SceneSpec s;
    s.name = "moving-layer";
    s.width = size;
    s.height = size;
    s.grid_m = grid;
    s.grid_n = grid;
    s.frames = frames;
    s.disparity_scale = 4.0;
    s.flow_scale = 2.0;
    s.seed = 11;

    LayerSpec back;
    back.disparity = 0.2;
    back.texture = TextureKind::ValueNoise;
    back.texture_seed = 3;
    back.texture_scale = 6.0;

    LayerSpec front;
    front.disparity = 0.8;
    front.velocity_x = 1.5;
    front.velocity_y = 0.0;
    front.texture = TextureKind::TintedNoise;
    front.texture_seed = 4;
    front.texture_scale = 4.0;
    front.mask = MaskKind::Blob;
    front.blob_cx = size * 0.5 - 1.5 * (frames - 1) * 0.5;
    front.blob_cy = size * 0.5;
    front.blob_rx = size * 0.25;
    front.blob_ry = size * 0.22;
    front.blob_wobble = 0.1;

    s.layers = {back, front};
    return s;
}

SceneSpec zero_parallax_scene(int size, int grid) {
    SceneSpec s;
    s.name = "zero-parallax";
    s.width = size;
    s.height = size;
    s.grid_m = grid;
    s.grid_n = grid;
    s.frames = 1;
    s.disparity_scale = 8.0;
    s.seed = 5;
    LayerSpec only;
    only.disparity = 0.0;
    only.texture = TextureKind::ValueNoise;
    only.texture_seed = 9;
    only.texture_scale = 6.0;
    s.layers = {only};
    return s;
}

} // namespace nlfv
