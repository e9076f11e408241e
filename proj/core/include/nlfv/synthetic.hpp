// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/dataset.hpp"
#include "nlfv/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nlfv {

enum class TextureKind { ValueNoise, Checkerboard, TintedNoise };
enum class MaskKind { Full, Blob };

struct LayerSpec {
    /// Normalized disparity: 0 = far plane, 1 = nearest.
    double disparity = 0.0;
    /// Motion in pixels per frame.
    double velocity_x = 0.0;
    double velocity_y = 0.0;
    TextureKind texture = TextureKind::ValueNoise;
    std::uint64_t texture_seed = 0;
    /// Feature size of the texture in pixels.
    double texture_scale = 6.0;
    MaskKind mask = MaskKind::Full;
    /// Blob center and radii in layer-local pixels.
    double blob_cx = 0.0;
    double blob_cy = 0.0;
    double blob_rx = 8.0;
    double blob_ry = 8.0;
    /// Relative radius modulation of the blob outline.
    double blob_wobble = 0.0;
};

/// Layered procedural scene. Layers are ordered far to near; a nearer layer
/// hides farther ones wherever its mask is set.
struct SceneSpec {
    std::string name = "synthetic";
    int width = 64;
    int height = 64;
    int grid_m = 3;
    int grid_n = 3;
    int frames = 1;
    double disparity_scale = 8.0;
    double flow_scale = 0.0;
    std::uint64_t seed = 1;
    std::vector<LayerSpec> layers;

    /// Throws SpecError on violated invariants.
    void validate() const;
};

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::string& path);

/// Textured background plus a near blob; static.
SceneSpec two_layer_scene(int size = 64, int grid = 3);
/// Static background plus a blob moving horizontally.
SceneSpec moving_layer_scene(int size = 32, int grid = 3, int frames = 5);
/// A single far layer: every view and frame is identical.
SceneSpec zero_parallax_scene(int size = 32, int grid = 3);

/// Pixel translation of a layer at coordinate x: parallax plus motion.
struct LayerShift {
    double dx = 0.0;
    double dy = 0.0;
};
LayerShift layer_shift(const SceneSpec& spec, const LayerSpec& layer, const LFCoordinate& x);

/// Renders the view at any continuous coordinate (fractional time included).
Image render_view(const SceneSpec& spec, const LFCoordinate& x);
/// Index of the front-most layer per pixel, -1 where no layer is present.
std::vector<int> layer_map(const SceneSpec& spec, const LFCoordinate& x);
/// Ground-truth geometry map (disparity, encoded flow u, encoded flow v) of
/// the front-most layer, 3 x H x W, encoded as the decoder would output it.
Tensor oracle_geometry(const SceneSpec& spec, const LFCoordinate& x);

/// Renders every grid view; images are quantized to 8 bits so an in-memory
/// dataset matches its saved copy exactly.
LightFieldDataset generate_synthetic(const SceneSpec& spec);

} // namespace nlfv
