// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/pipeline.hpp"

#include "nlfv/error.hpp"
#include "nlfv/ops.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace nlfv {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Accumulates elapsed time into *sink (if any) on destruction.
class ScopedTimer {
  public:
    explicit ScopedTimer(double* sink) : sink_(sink), start_(Clock::now()) {}
    ~ScopedTimer() {
        if (sink_ != nullptr) {
            *sink_ += seconds_since(start_);
        }
    }
    ScopedTimer(const ScopedTimer&) = delete;
    ScopedTimer& operator=(const ScopedTimer&) = delete;

  private:
    double* sink_;
    Clock::time_point start_;
};

ViewPos view_position(const LightFieldDataset& ds, const LFCoordinate& x) {
    return {ds.grid_m > 1 ? x.u : 0.5, ds.grid_n > 1 ? x.v : 0.5};
}

Tensor depth_channel(Graph* graph, const Tensor& geometry) { return ops::slice_channels(graph, geometry, 0, 1); }

Tensor uniform_weights(int k, int h, int w) {
    return Tensor::full({k, h, w}, 1.0f / static_cast<float>(k));
}

// Warps color and depth together and returns (color, depth).
std::pair<Tensor, Tensor> warp_color_and_depth(Graph* graph, const Tensor& color, const Tensor& geometry,
                                               const Tensor& flow) {
    const Tensor parts[] = {color, depth_channel(graph, geometry)};
    const Tensor stacked = ops::concat_channels(graph, parts);
    const Tensor warped = warp(graph, stacked, flow);
    return {ops::slice_channels(graph, warped, 0, 3), ops::slice_channels(graph, warped, 3, 1)};
}

Tensor combine(Graph* graph, GeometryCache& cache, const LFCoordinate& x, std::span<const Tensor> colors,
               std::span<const Tensor> depths, const InterpOptions& options, std::vector<Tensor>* trace) {
    const int k = static_cast<int>(colors.size());
    const int h = colors[0].dim(1);
    const int w = colors[0].dim(2);
    Tensor weights;
    if (options.occlusion) {
        const Tensor& target = cache.get(x);
        ScopedTimer timer(options.timing ? &options.timing->warp_seconds : nullptr);
        weights = occlusion_weights(graph, depth_channel(graph, target), depths, options.kappa);
    } else {
        weights = uniform_weights(k, h, w);
    }
    ScopedTimer timer(options.timing ? &options.timing->warp_seconds : nullptr);
    if (trace != nullptr) {
        trace->push_back(weights);
    }
    return ops::weighted_sum(graph, weights, colors);
}

} // namespace

DecoderGeometry::DecoderGeometry(const Decoder& decoder) : decoder_(&decoder) {
    if (decoder.config().mode != DecoderMode::Geometry) {
        throw UsageError("geometry source needs a geometry-mode decoder");
    }
}

Tensor DecoderGeometry::geometry(const LFCoordinate& x, Graph* graph) const { return decoder_->decode(x, graph); }

OracleGeometry::OracleGeometry(SceneSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Tensor OracleGeometry::geometry(const LFCoordinate& x, Graph*) const { return oracle_geometry(spec_, x); }

GeometryCache::GeometryCache(const GeometrySource& source, Graph* graph) : source_(&source), graph_(graph) {}

const Tensor& GeometryCache::get(const LFCoordinate& x) {
    const auto key = std::make_tuple(x.u, x.v, x.t);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        const auto start = Clock::now();
        Tensor g = source_->geometry(x, graph_);
        decode_seconds_ += seconds_since(start);
        it = cache_.emplace(key, std::move(g)).first;
    }
    return it->second;
}

Tensor spatial_flow(Graph* graph, const Tensor& geometry, ViewPos src, ViewPos tgt, double disparity_scale) {
    const Tensor z = depth_channel(graph, geometry);
    const Tensor parts[] = {ops::scale(graph, z, static_cast<float>(disparity_scale * (src.u - tgt.u))),
                            ops::scale(graph, z, static_cast<float>(disparity_scale * (src.v - tgt.v)))};
    return ops::concat_channels(graph, parts);
}

Tensor temporal_flow(Graph* graph, const Tensor& geometry, double src_t, double tgt_t, int frames,
                     double flow_scale) {
    const double span = (src_t - tgt_t) * static_cast<double>(std::max(frames - 1, 0)) * flow_scale;
    const auto factor = static_cast<float>(2.0 * span);
    const auto offset = static_cast<float>(-span);
    const Tensor parts[] = {ops::scale_shift(graph, ops::slice_channels(graph, geometry, 1, 1), factor, offset),
                            ops::scale_shift(graph, ops::slice_channels(graph, geometry, 2, 1), factor, offset)};
    return ops::concat_channels(graph, parts);
}

Tensor warp(Graph* graph, const Tensor& image, const Tensor& flow) {
    return ops::grid_sample_bilinear(graph, image, ops::offset_by_pixel_grid(graph, flow));
}

Tensor occlusion_weights(Graph* graph, const Tensor& target_depth, std::span<const Tensor> warped_source_depths,
                         float kappa) {
    if (warped_source_depths.empty()) {
        throw UsageError("occlusion_weights: no sources");
    }
    const std::vector<Tensor> targets(warped_source_depths.size(), target_depth);
    const Tensor target_stack = ops::concat_channels(graph, targets);
    const Tensor source_stack = ops::concat_channels(graph, warped_source_depths);
    const Tensor distance = ops::abs_val(graph, ops::subtract(graph, target_stack, source_stack));
    return ops::softmax_over_stack(graph, ops::scale(graph, distance, -kappa));
}

Tensor interpolate_spatial(GeometryCache& geometry, const ViewSet& views, const LFCoordinate& x,
                           const InterpOptions& options, Graph* graph) {
    const auto& ds = views.dataset();
    const auto frame = ds.frame_at(x.t);
    if (!frame) {
        throw UsageError("spatial interpolation needs x.t on a frame, got " + to_string(x));
    }
    std::vector<GridIndex> neighbors = views.available_at_frame(*frame);
    if (options.exclude_self) {
        if (const auto self = ds.grid_index(x)) {
            std::erase(neighbors, *self);
        }
    }
    const ViewPos target = view_position(ds, x);
    if (options.max_spatial_neighbors > 0 && neighbors.size() > static_cast<std::size_t>(options.max_spatial_neighbors)) {
        auto dist = [&](const GridIndex& g) {
            const double du = ds.view_u(g.i) - target.u;
            const double dv = ds.view_v(g.j) - target.v;
            return du * du + dv * dv;
        };
        std::stable_sort(neighbors.begin(), neighbors.end(),
                         [&](const GridIndex& a, const GridIndex& b) { return dist(a) < dist(b); });
        neighbors.resize(options.max_spatial_neighbors);
    }
    if (neighbors.empty()) {
        throw UsageError("spatial interpolation at " + to_string(x) + " has no neighbor views");
    }
    if (options.trace != nullptr) {
        options.trace->spatial_neighbors.push_back(neighbors);
    }

    std::vector<Tensor> source_geometry;
    source_geometry.reserve(neighbors.size());
    for (const auto& y : neighbors) {
        source_geometry.push_back(geometry.get(ds.coordinate(y)));
    }

    std::vector<Tensor> colors;
    std::vector<Tensor> depths;
    {
        ScopedTimer timer(options.timing ? &options.timing->warp_seconds : nullptr);
        for (std::size_t i = 0; i < neighbors.size(); ++i) {
            const GridIndex& y = neighbors[i];
            const ViewPos source{ds.view_u(y.i), ds.view_v(y.j)};
            const Tensor flow = spatial_flow(graph, source_geometry[i], source, target, ds.disparity_scale);
            auto [color, depth] = warp_color_and_depth(graph, views.image(y), source_geometry[i], flow);
            colors.push_back(std::move(color));
            depths.push_back(std::move(depth));
        }
    }
    return combine(graph, geometry, x, colors, depths, options,
                   options.trace ? &options.trace->spatial_weights : nullptr);
}

std::vector<int> temporal_neighbors(const ViewSet& views, const LFCoordinate& x, bool exclude_self) {
    const auto& ds = views.dataset();
    const std::vector<int> frames = views.available_frames();
    if (frames.empty()) {
        return {};
    }
    const auto on_frame = ds.frame_at(x.t);
    if (ds.frames <= 1) {
        return {frames.front()};
    }
    if (on_frame && !exclude_self && std::ranges::binary_search(frames, *on_frame)) {
        return {*on_frame};
    }
    const double position = x.t * static_cast<double>(ds.frames - 1);
    std::vector<int> out;
    // Largest frame below (or at, when allowed) the position.
    for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
        const bool ok = exclude_self && on_frame ? *it < *on_frame : *it <= position;
        if (ok) {
            out.push_back(*it);
            break;
        }
    }
    for (int f : frames) {
        const bool ok = exclude_self && on_frame ? f > *on_frame : f >= position;
        if (ok) {
            if (out.empty() || out.back() != f) {
                out.push_back(f);
            }
            break;
        }
    }
    std::ranges::sort(out);
    return out;
}

Tensor interpolate_temporal(GeometryCache& geometry, const ViewSet& views, const LFCoordinate& x,
                            const InterpOptions& options, Graph* graph) {
    const auto& ds = views.dataset();
    const std::vector<int> neighbors = temporal_neighbors(views, x, options.exclude_self);
    if (neighbors.empty()) {
        throw UsageError("temporal interpolation at " + to_string(x) + " has no neighbor frames");
    }
    const auto on_frame = ds.frame_at(x.t);
    if (neighbors.size() == 1 && on_frame && neighbors.front() == *on_frame && !options.exclude_self) {
        return interpolate_spatial(geometry, views, x, options, graph);
    }
    if (ds.frames <= 1) {
        return interpolate_spatial(geometry, views, x, options, graph);
    }

    InterpOptions proxy_options = options;
    proxy_options.exclude_self = false;

    std::vector<Tensor> colors;
    std::vector<Tensor> depths;
    for (int k : neighbors) {
        const LFCoordinate proxy{x.u, x.v, ds.frame_time(k)};
        const Tensor proxy_image = interpolate_spatial(geometry, views, proxy, proxy_options, graph);
        const Tensor& proxy_geometry = geometry.get(proxy);
        ScopedTimer timer(options.timing ? &options.timing->warp_seconds : nullptr);
        const Tensor flow = temporal_flow(graph, proxy_geometry, proxy.t, x.t, ds.frames, ds.flow_scale);
        auto [color, depth] = warp_color_and_depth(graph, proxy_image, proxy_geometry, flow);
        colors.push_back(std::move(color));
        depths.push_back(std::move(depth));
    }
    return combine(graph, geometry, x, colors, depths, options,
                   options.trace ? &options.trace->temporal_weights : nullptr);
}

RenderMode RenderMode::parse(const std::string& text) {
    if (text == "full") return {RenderModeKind::Full};
    if (text == "no-occlusion" || text == "no_occlusion") return {RenderModeKind::NoOcclusion};
    if (text == "no-warp" || text == "no_warp") return {RenderModeKind::NoWarp};
    if (text == "blend") return {RenderModeKind::Blend};
    if (text.rfind("down-up", 0) == 0 || text.rfind("down_up", 0) == 0) {
        RenderMode m{RenderModeKind::DownUp, 8};
        if (text.size() > 7) {
            if (text[7] != ':') {
                throw UsageError("bad render mode '" + text + "'");
            }
            try {
                m.factor = std::stoi(text.substr(8));
            } catch (const std::exception&) {
                throw UsageError("bad down-up factor in '" + text + "'");
            }
            if (m.factor < 1) {
                throw UsageError("down-up factor must be >= 1");
            }
        }
        return m;
    }
    throw UsageError("unknown render mode '" + text + "' (full, no-occlusion, no-warp, blend, down-up[:k])");
}

std::string RenderMode::name() const {
    switch (kind) {
    case RenderModeKind::Full: return "full";
    case RenderModeKind::NoOcclusion: return "no-occlusion";
    case RenderModeKind::NoWarp: return "no-warp";
    case RenderModeKind::Blend: return "blend";
    case RenderModeKind::DownUp: return "down-up:" + std::to_string(factor);
    }
    return "full";
}

Image blend_views(const ViewSet& views, const LFCoordinate& x) {
    require_in_unit_cube(x);
    const auto& ds = views.dataset();
    const auto indices = views.available_indices();
    if (indices.empty()) {
        throw UsageError("blend: no observed views available");
    }
    auto tent = [](double d, int count, double radius) {
        if (count <= 1) {
            return 1.0;
        }
        const double support = radius / static_cast<double>(count - 1);
        return std::max(0.0, 1.0 - std::fabs(d) / support);
    };
    std::vector<double> weights(indices.size(), 0.0);
    double total = 0.0;
    for (double radius = 1.0; total <= 0.0 && radius <= 1024.0; radius *= 2.0) {
        total = 0.0;
        for (std::size_t n = 0; n < indices.size(); ++n) {
            const auto c = ds.coordinate(indices[n]);
            weights[n] = tent(x.u - c.u, ds.grid_m, radius) * tent(x.v - c.v, ds.grid_n, radius) *
                         tent(x.t - c.t, ds.frames, radius);
            total += weights[n];
        }
    }
    std::vector<double> acc(static_cast<std::size_t>(3) * ds.width * ds.height, 0.0);
    for (std::size_t n = 0; n < indices.size(); ++n) {
        if (weights[n] <= 0.0) {
            continue;
        }
        const auto values = views.image(indices[n]).values();
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += weights[n] * values[i];
        }
    }
    Image out(ds.width, ds.height);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out.data[i] = static_cast<float>(acc[i] / total);
    }
    return out;
}

Image down_up(const Image& image, int factor) {
    if (factor < 1) {
        throw UsageError("down_up: factor must be >= 1");
    }
    Image out(image.width, image.height);
    for (int c = 0; c < Image::kChannels; ++c) {
        for (int by = 0; by < image.height; by += factor) {
            for (int bx = 0; bx < image.width; bx += factor) {
                const int ey = std::min(by + factor, image.height);
                const int ex = std::min(bx + factor, image.width);
                double acc = 0.0;
                for (int y = by; y < ey; ++y) {
                    for (int x = bx; x < ex; ++x) {
                        acc += image.at(c, y, x);
                    }
                }
                const auto mean = static_cast<float>(acc / ((ey - by) * (ex - bx)));
                for (int y = by; y < ey; ++y) {
                    for (int x = bx; x < ex; ++x) {
                        out.at(c, y, x) = mean;
                    }
                }
            }
        }
    }
    return out;
}

Image render(const RenderContext& context, const LFCoordinate& x, const RenderMode& mode, RenderTiming* timing) {
    require_in_unit_cube(x);
    if (context.views == nullptr) {
        throw UsageError("render: no observed views");
    }
    const auto start = Clock::now();
    Image result;
    RenderTiming local;

    switch (mode.kind) {
    case RenderModeKind::Full:
    case RenderModeKind::NoOcclusion:
    case RenderModeKind::DownUp: {
        if (context.geometry == nullptr) {
            throw UsageError("render mode '" + mode.name() + "' requires a trained geometry decoder");
        }
        GeometryCache cache(*context.geometry, nullptr);
        StageTiming stage;
        InterpOptions options;
        options.kappa = context.kappa;
        options.occlusion = mode.kind != RenderModeKind::NoOcclusion;
        options.max_spatial_neighbors = context.max_spatial_neighbors;
        options.timing = &stage;
        const Tensor out = interpolate_temporal(cache, *context.views, x, options);
        {
            ScopedTimer timer(&stage.warp_seconds);
            result = to_image(out);
            if (mode.kind == RenderModeKind::DownUp) {
                result = down_up(result, mode.factor);
            }
        }
        local.decode_seconds = cache.decode_seconds();
        local.warp_seconds = stage.warp_seconds;
        break;
    }
    case RenderModeKind::NoWarp: {
        if (context.color_decoder == nullptr || context.color_decoder->config().mode != DecoderMode::Color) {
            throw UsageError("render mode 'no-warp' requires a color-mode decoder");
        }
        const auto t0 = Clock::now();
        result = to_image(context.color_decoder->decode(x));
        local.decode_seconds = seconds_since(t0);
        break;
    }
    case RenderModeKind::Blend: {
        const auto t0 = Clock::now();
        result = blend_views(*context.views, x);
        local.warp_seconds = seconds_since(t0);
        break;
    }
    }
    local.total_seconds = seconds_since(start);
    if (timing != nullptr) {
        *timing = local;
    }
    return result;
}

namespace {

Image average_renders(const RenderContext& context, const std::vector<LFCoordinate>& coords) {
    std::vector<double> acc;
    Image first;
    for (const auto& c : coords) {
        const Image img = render(context, c, RenderMode{});
        if (acc.empty()) {
            acc.assign(img.data.size(), 0.0);
            first = img;
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += img.data[i];
        }
    }
    Image out(first.width, first.height);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out.data[i] = static_cast<float>(acc[i] / static_cast<double>(coords.size()));
    }
    return out;
}

} // namespace

Image render_dof(const RenderContext& context, const LFCoordinate& center, double aperture, int samples) {
    if (samples < 1) {
        throw UsageError("depth of field needs samples >= 1");
    }
    if (!(aperture >= 0.0)) {
        throw UsageError("aperture must be >= 0");
    }
    require_in_unit_cube(center);
    if (aperture == 0.0 || samples == 1) {
        return render(context, center, RenderMode{});
    }
    // Golden-angle spiral: deterministic, area-uniform over the disc.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<LFCoordinate> coords;
    for (int i = 0; i < samples; ++i) {
        const double r = aperture * std::sqrt((i + 0.5) / samples);
        const double theta = golden * i;
        coords.push_back({std::clamp(center.u + r * std::cos(theta), 0.0, 1.0),
                          std::clamp(center.v + r * std::sin(theta), 0.0, 1.0), center.t});
    }
    return average_renders(context, coords);
}

Image render_motion_blur(const RenderContext& context, const LFCoordinate& center, double shutter, int samples) {
    if (samples < 1) {
        throw UsageError("motion blur needs samples >= 1");
    }
    if (!(shutter >= 0.0)) {
        throw UsageError("shutter must be >= 0");
    }
    require_in_unit_cube(center);
    if (shutter == 0.0 || samples == 1) {
        return render(context, center, RenderMode{});
    }
    std::vector<LFCoordinate> coords;
    for (int i = 0; i < samples; ++i) {
        const double t = center.t - 0.5 * shutter + shutter * (i + 0.5) / samples;
        coords.push_back({center.u, center.v, std::clamp(t, 0.0, 1.0)});
    }
    return average_renders(context, coords);
}

} // namespace nlfv
