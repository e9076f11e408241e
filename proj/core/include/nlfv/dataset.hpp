// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/image.hpp"
#include "nlfv/tensor.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nlfv {

/// Integer address of an observation: view (i, j) in the grid at frame k.
struct GridIndex {
    int i = 0;
    int j = 0;
    int k = 0;
    auto operator<=>(const GridIndex&) const = default;
};

std::string to_string(const GridIndex& index);

/// Continuous view-time coordinate (u, v, t) in [0,1]^3. It addresses a whole
/// image, never a pixel inside one.
struct LFCoordinate {
    double u = 0.5;
    double v = 0.5;
    double t = 0.0;

    bool in_unit_cube() const;
    auto operator<=>(const LFCoordinate&) const = default;
};

std::string to_string(const LFCoordinate& x);

/// Throws UsageError unless x lies in [0,1]^3 (interpolation only).
void require_in_unit_cube(const LFCoordinate& x);

struct LightFieldDataset {
    std::string scene = "scene";
    int grid_m = 1;
    int grid_n = 1;
    int frames = 1;
    int width = 0;
    int height = 0;
    /// Pixels of displacement per unit normalized view offset at disparity 1.
    double disparity_scale = 1.0;
    /// Largest per-frame motion, in pixels, the temporal flow encoding spans.
    double flow_scale = 0.0;
    std::map<GridIndex, Image> images;
    std::set<GridIndex> holdout;

    /// Normalized coordinate of a grid index; degenerate axes map to 0.5.
    LFCoordinate coordinate(const GridIndex& index) const;
    /// Exact inverse of coordinate(); nullopt for off-grid coordinates.
    std::optional<GridIndex> grid_index(const LFCoordinate& x) const;

    double view_u(int i) const;
    double view_v(int j) const;
    double frame_time(int k) const;
    /// Frame whose time equals t exactly, if any.
    std::optional<int> frame_at(double t) const;

    bool in_grid(const GridIndex& index) const;
    std::vector<GridIndex> all_indices() const;
    const Image& image(const GridIndex& index) const;

    /// Checks the structural invariants; throws LoadError on violation.
    void validate() const;
};

/// Reads manifest.json (or a directory containing it) plus the PPM views.
LightFieldDataset load_dataset(const std::filesystem::path& manifest_or_dir);
/// Writes manifest.json and one v_i_j_k.ppm per stored image into `dir`.
void save_dataset(const LightFieldDataset& dataset, const std::filesystem::path& dir);

enum class HoldoutPattern { None, CenterView, CenterFrame, Explicit };

struct HoldoutSpec {
    HoldoutPattern pattern = HoldoutPattern::None;
    std::vector<GridIndex> indices;

    /// "none", "center-view", "center-frame" or "i,j,k;i,j,k;...".
    static HoldoutSpec parse(const std::string& text);
};

struct HoldoutSplit {
    std::vector<GridIndex> train;
    std::set<GridIndex> holdout;
};

/// Resolves a holdout pattern against the dataset grid. The center view is
/// held out at every frame; the center frame is held out at every view.
HoldoutSplit holdout_split(const LightFieldDataset& dataset, const HoldoutSpec& spec);

/// The observations a renderer or trainer is allowed to read: every stored
/// image minus an excluded set. Reads of excluded views throw.
class ViewSet {
  public:
    ViewSet(const LightFieldDataset& dataset, std::set<GridIndex> excluded);

    const LightFieldDataset& dataset() const { return *dataset_; }
    const std::set<GridIndex>& excluded() const { return excluded_; }

    bool available(const GridIndex& index) const;
    std::vector<GridIndex> available_at_frame(int k) const;
    std::vector<int> available_frames() const;
    std::vector<GridIndex> available_indices() const;

    const Tensor& image(const GridIndex& index) const;

    /// Records every index passed to image(). Not thread-safe while set.
    void set_access_log(std::set<GridIndex>* log) { access_log_ = log; }

  private:
    const LightFieldDataset* dataset_;
    std::set<GridIndex> excluded_;
    std::map<GridIndex, Tensor> tensors_;
    std::set<GridIndex>* access_log_ = nullptr;
};

} // namespace nlfv
