// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/dataset.hpp"
#include "nlfv/decoder.hpp"
#include "nlfv/synthetic.hpp"
#include "nlfv/tensor.hpp"

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace nlfv {

/// Position in the (u, v) view plane.
struct ViewPos {
    double u = 0.5;
    double v = 0.5;
};

/// Anything that can produce a 3 x H x W geometry map for a coordinate.
class GeometrySource {
  public:
    virtual ~GeometrySource() = default;
    virtual Tensor geometry(const LFCoordinate& x, Graph* graph) const = 0;
};

class DecoderGeometry final : public GeometrySource {
  public:
    explicit DecoderGeometry(const Decoder& decoder);
    Tensor geometry(const LFCoordinate& x, Graph* graph) const override;

  private:
    const Decoder* decoder_;
};

/// Ground-truth geometry of a synthetic scene, for upper-bound runs.
class OracleGeometry final : public GeometrySource {
  public:
    explicit OracleGeometry(SceneSpec spec);
    Tensor geometry(const LFCoordinate& x, Graph* graph) const override;

  private:
    SceneSpec spec_;
};

/// Per-call memo of decoded geometry so each coordinate is decoded once per
/// render or training step. Also accumulates time spent decoding.
class GeometryCache {
  public:
    GeometryCache(const GeometrySource& source, Graph* graph);
    const Tensor& get(const LFCoordinate& x);

    double decode_seconds() const { return decode_seconds_; }
    std::size_t decode_count() const { return cache_.size(); }

  private:
    const GeometrySource* source_;
    Graph* graph_;
    std::map<std::tuple<double, double, double>, Tensor> cache_;
    double decode_seconds_ = 0.0;
};

/// Per-pixel displacement (dx, dy) from target pixel to source sample,
/// ω_z * disparity_scale * (src - tgt). Temporal channels are ignored.
Tensor spatial_flow(Graph* graph, const Tensor& geometry, ViewPos src, ViewPos tgt, double disparity_scale);

/// Signed motion (2ω_{u,v} - 1) * flow_scale px/frame times the frame offset
/// (src_t - tgt_t) * (frames - 1).
Tensor temporal_flow(Graph* graph, const Tensor& geometry, double src_t, double tgt_t, int frames,
                     double flow_scale);

/// output(p) = bilinear(image, p + flow(p)), border clamped.
Tensor warp(Graph* graph, const Tensor& image, const Tensor& flow);

/// Softmax over sources of -kappa * |tgt_z - warped_src_z[i]|, K x H x W.
Tensor occlusion_weights(Graph* graph, const Tensor& target_depth, std::span<const Tensor> warped_source_depths,
                         float kappa);

/// Blending weights observed during an interpolation, for inspection.
struct InterpTrace {
    std::vector<Tensor> spatial_weights;
    std::vector<Tensor> temporal_weights;
    std::vector<std::vector<GridIndex>> spatial_neighbors;
};

struct StageTiming {
    double warp_seconds = 0.0;
};

struct InterpOptions {
    float kappa = 50.0f;
    /// false: uniform 1/K weights instead of soft occlusion.
    bool occlusion = true;
    /// Training mode: the observation at x itself is never used.
    bool exclude_self = false;
    /// 0 keeps every same-frame view; otherwise the nearest N.
    int max_spatial_neighbors = 0;
    InterpTrace* trace = nullptr;
    StageTiming* timing = nullptr;
};

/// Sum over same-frame neighbor views of occlusion weight times the neighbor
/// image warped to x. x.t must sit on a frame.
Tensor interpolate_spatial(GeometryCache& geometry, const ViewSet& views, const LFCoordinate& x,
                           const InterpOptions& options, Graph* graph = nullptr);

/// Temporal stage over spatial proxies at the bracketing frames. When x.t is
/// on an available frame (and not excluded) the result is the spatial
/// interpolation itself.
Tensor interpolate_temporal(GeometryCache& geometry, const ViewSet& views, const LFCoordinate& x,
                            const InterpOptions& options, Graph* graph = nullptr);

/// Frames used as temporal neighbors of x.
std::vector<int> temporal_neighbors(const ViewSet& views, const LFCoordinate& x, bool exclude_self);

enum class RenderModeKind { Full, NoOcclusion, NoWarp, Blend, DownUp };

struct RenderMode {
    RenderModeKind kind = RenderModeKind::Full;
    /// Block size for DownUp.
    int factor = 8;

    /// full | no-occlusion | no-warp | blend | down-up[:k]
    static RenderMode parse(const std::string& text);
    std::string name() const;
    bool operator==(const RenderMode&) const = default;
};

struct RenderContext {
    const ViewSet* views = nullptr;
    const GeometrySource* geometry = nullptr;
    /// Color-mode decoder for the direct-regression mode.
    const Decoder* color_decoder = nullptr;
    float kappa = 50.0f;
    int max_spatial_neighbors = 0;
};

struct RenderTiming {
    double total_seconds = 0.0;
    double decode_seconds = 0.0;
    double warp_seconds = 0.0;
};

Image render(const RenderContext& context, const LFCoordinate& x, const RenderMode& mode,
             RenderTiming* timing = nullptr);

/// Tent-weighted blend of the enclosing observed views, no warping. The tent
/// support widens until at least one available view contributes.
Image blend_views(const ViewSet& views, const LFCoordinate& x);

/// Box-downsample by `factor`, then nearest-upsample back.
Image down_up(const Image& image, int factor);

/// Mean of `samples` full renders over a disc of radius `aperture` in (u, v).
Image render_dof(const RenderContext& context, const LFCoordinate& center, double aperture, int samples);
/// Mean of `samples` full renders over [t - shutter/2, t + shutter/2].
Image render_motion_blur(const RenderContext& context, const LFCoordinate& center, double shutter, int samples);

} // namespace nlfv
