// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/dataset.hpp"

#include "nlfv/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace nlfv {

std::string to_string(const GridIndex& index) {
    return "(" + std::to_string(index.i) + "," + std::to_string(index.j) + "," + std::to_string(index.k) + ")";
}

bool LFCoordinate::in_unit_cube() const {
    auto ok = [](double c) { return std::isfinite(c) && c >= 0.0 && c <= 1.0; };
    return ok(u) && ok(v) && ok(t);
}

std::string to_string(const LFCoordinate& x) {
    std::ostringstream s;
    s << "(" << x.u << "," << x.v << "," << x.t << ")";
    return s.str();
}

void require_in_unit_cube(const LFCoordinate& x) {
    if (!x.in_unit_cube()) {
        throw UsageError("coordinate " + to_string(x) + " outside [0,1]^3 (interpolation only)");
    }
}

namespace {

double axis_position(int index, int count) {
    return count <= 1 ? 0.5 : static_cast<double>(index) / static_cast<double>(count - 1);
}

std::optional<int> axis_index(double value, int count) {
    if (count <= 1) {
        return 0;
    }
    const long idx = std::lround(value * (count - 1));
    if (idx < 0 || idx >= count || axis_position(static_cast<int>(idx), count) != value) {
        return std::nullopt;
    }
    return static_cast<int>(idx);
}

} // namespace

double LightFieldDataset::view_u(int i) const { return axis_position(i, grid_m); }
double LightFieldDataset::view_v(int j) const { return axis_position(j, grid_n); }
double LightFieldDataset::frame_time(int k) const { return axis_position(k, frames); }

std::optional<int> LightFieldDataset::frame_at(double t) const { return axis_index(t, frames); }

LFCoordinate LightFieldDataset::coordinate(const GridIndex& index) const {
    return {view_u(index.i), view_v(index.j), frame_time(index.k)};
}

std::optional<GridIndex> LightFieldDataset::grid_index(const LFCoordinate& x) const {
    const auto i = axis_index(x.u, grid_m);
    const auto j = axis_index(x.v, grid_n);
    const auto k = axis_index(x.t, frames);
    if (!i || !j || !k) {
        return std::nullopt;
    }
    return GridIndex{*i, *j, *k};
}

bool LightFieldDataset::in_grid(const GridIndex& index) const {
    return index.i >= 0 && index.i < grid_m && index.j >= 0 && index.j < grid_n && index.k >= 0 &&
           index.k < frames;
}

std::vector<GridIndex> LightFieldDataset::all_indices() const {
    std::vector<GridIndex> out;
    for (int k = 0; k < frames; ++k) {
        for (int i = 0; i < grid_m; ++i) {
            for (int j = 0; j < grid_n; ++j) {
                out.push_back({i, j, k});
            }
        }
    }
    return out;
}

const Image& LightFieldDataset::image(const GridIndex& index) const {
    const auto it = images.find(index);
    if (it == images.end()) {
        throw UsageError("no image stored for view " + to_string(index));
    }
    return it->second;
}

void LightFieldDataset::validate() const {
    if (grid_m < 1 || grid_n < 1 || frames < 1) {
        throw LoadError("grid and frame counts must be >= 1");
    }
    if (width < 1 || height < 1) {
        throw LoadError("image size must be positive");
    }
    if (!(disparity_scale > 0.0) || !(flow_scale >= 0.0)) {
        throw LoadError("disparity_scale must be > 0 and flow_scale >= 0");
    }
    for (const auto& [index, img] : images) {
        if (!in_grid(index)) {
            throw LoadError("view " + to_string(index) + " outside the grid");
        }
        if (img.width != width || img.height != height) {
            throw LoadError("view " + to_string(index) + " is " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + ", dataset is " + std::to_string(width) + "x" +
                            std::to_string(height));
        }
    }
    for (const auto& index : holdout) {
        if (!in_grid(index)) {
            throw LoadError("holdout index " + to_string(index) + " outside the grid");
        }
    }
    for (const auto& index : all_indices()) {
        if (!holdout.contains(index) && !images.contains(index)) {
            throw LoadError("missing view " + to_string(index));
        }
    }
}

namespace {

std::string view_file_name(const GridIndex& g) {
    return "v_" + std::to_string(g.i) + "_" + std::to_string(g.j) + "_" + std::to_string(g.k) + ".ppm";
}

GridIndex parse_index(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number_integer() || !j[1].is_number_integer() ||
        !j[2].is_number_integer()) {
        throw LoadError(where + ": index must be [i,j,k]");
    }
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

} // namespace

LightFieldDataset load_dataset(const std::filesystem::path& manifest_or_dir) {
    std::filesystem::path manifest = manifest_or_dir;
    if (std::filesystem::is_directory(manifest)) {
        manifest /= "manifest.json";
    }
    std::ifstream in(manifest);
    if (!in) {
        throw LoadError("cannot open manifest '" + manifest.string() + "'");
    }
    const std::string where = manifest.string();
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(where + ": malformed manifest: " + e.what());
    }

    LightFieldDataset ds;
    try {
        ds.grid_m = j.at("grid").at(0).get<int>();
        ds.grid_n = j.at("grid").at(1).get<int>();
        ds.frames = j.at("frames").get<int>();
        ds.width = j.at("size").at(0).get<int>();
        ds.height = j.at("size").at(1).get<int>();
        ds.disparity_scale = j.at("disparity_scale").get<double>();
        ds.flow_scale = j.at("flow_scale").get<double>();
        ds.scene = j.value("scene", manifest.parent_path().filename().string());
        if (ds.scene.empty()) {
            ds.scene = "scene";
        }
        for (const auto& h : j.value("holdout", nlohmann::json::array())) {
            ds.holdout.insert(parse_index(h, where));
        }
        const auto dir = manifest.parent_path();
        for (const auto& v : j.at("views")) {
            const GridIndex index = parse_index(v.at("index"), where);
            const auto file = dir / v.at("file").get<std::string>();
            ds.images[index] = read_ppm(file);
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(where + ": malformed manifest: " + e.what());
    }
    try {
        ds.validate();
    } catch (const LoadError& e) {
        throw LoadError(where + ": " + e.what());
    }
    return ds;
}

void save_dataset(const LightFieldDataset& dataset, const std::filesystem::path& dir) {
    dataset.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["scene"] = dataset.scene;
    j["grid"] = {dataset.grid_m, dataset.grid_n};
    j["frames"] = dataset.frames;
    j["size"] = {dataset.width, dataset.height};
    j["disparity_scale"] = dataset.disparity_scale;
    j["flow_scale"] = dataset.flow_scale;
    j["views"] = nlohmann::json::array();
    for (const auto& [index, img] : dataset.images) {
        const std::string file = view_file_name(index);
        write_ppm(dir / file, img);
        j["views"].push_back({{"index", {index.i, index.j, index.k}}, {"file", file}});
    }
    j["holdout"] = nlohmann::json::array();
    for (const auto& h : dataset.holdout) {
        j["holdout"].push_back({h.i, h.j, h.k});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw LoadError("cannot write manifest in '" + dir.string() + "'");
    }
    out << j.dump(2) << "\n";
}

HoldoutSpec HoldoutSpec::parse(const std::string& text) {
    HoldoutSpec spec;
    if (text.empty() || text == "none") {
        return spec;
    }
    if (text == "center-view") {
        spec.pattern = HoldoutPattern::CenterView;
        return spec;
    }
    if (text == "center-frame") {
        spec.pattern = HoldoutPattern::CenterFrame;
        return spec;
    }
    spec.pattern = HoldoutPattern::Explicit;
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ';')) {
        if (item.empty()) {
            continue;
        }
        GridIndex g;
        char c1 = 0;
        char c2 = 0;
        std::istringstream in(item);
        if (!(in >> g.i >> c1 >> g.j >> c2 >> g.k) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof()) {
            throw UsageError("bad holdout entry '" + item +
                             "' (expected none, center-view, center-frame or i,j,k;i,j,k)");
        }
        spec.indices.push_back(g);
    }
    return spec;
}

HoldoutSplit holdout_split(const LightFieldDataset& dataset, const HoldoutSpec& spec) {
    HoldoutSplit split;
    switch (spec.pattern) {
    case HoldoutPattern::None:
        break;
    case HoldoutPattern::CenterView:
        for (int k = 0; k < dataset.frames; ++k) {
            split.holdout.insert({(dataset.grid_m - 1) / 2, (dataset.grid_n - 1) / 2, k});
        }
        break;
    case HoldoutPattern::CenterFrame:
        for (int i = 0; i < dataset.grid_m; ++i) {
            for (int j = 0; j < dataset.grid_n; ++j) {
                split.holdout.insert({i, j, (dataset.frames - 1) / 2});
            }
        }
        break;
    case HoldoutPattern::Explicit:
        for (const auto& g : spec.indices) {
            if (!dataset.in_grid(g)) {
                throw UsageError("holdout index " + to_string(g) + " outside the grid");
            }
            split.holdout.insert(g);
        }
        break;
    }
    for (const auto& [index, img] : dataset.images) {
        if (!split.holdout.contains(index)) {
            split.train.push_back(index);
        }
    }
    if (split.train.empty()) {
        throw UsageError("holdout covers every observation; nothing left to train on");
    }
    return split;
}

ViewSet::ViewSet(const LightFieldDataset& dataset, std::set<GridIndex> excluded)
    : dataset_(&dataset), excluded_(std::move(excluded)) {
    for (const auto& [index, img] : dataset.images) {
        if (!excluded_.contains(index)) {
            tensors_.emplace(index, to_tensor(img));
        }
    }
}

bool ViewSet::available(const GridIndex& index) const { return tensors_.contains(index); }

std::vector<GridIndex> ViewSet::available_at_frame(int k) const {
    std::vector<GridIndex> out;
    for (const auto& [index, t] : tensors_) {
        if (index.k == k) {
            out.push_back(index);
        }
    }
    return out;
}

std::vector<int> ViewSet::available_frames() const {
    std::set<int> frames;
    for (const auto& [index, t] : tensors_) {
        frames.insert(index.k);
    }
    return {frames.begin(), frames.end()};
}

std::vector<GridIndex> ViewSet::available_indices() const {
    std::vector<GridIndex> out;
    for (const auto& [index, t] : tensors_) {
        out.push_back(index);
    }
    return out;
}

const Tensor& ViewSet::image(const GridIndex& index) const {
    const auto it = tensors_.find(index);
    if (it == tensors_.end()) {
        throw UsageError("view " + to_string(index) + " is not available to this reader");
    }
    if (access_log_ != nullptr) {
        access_log_->insert(index);
    }
    return it->second;
}

} // namespace nlfv
