// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/ops.hpp"

#include "nlfv/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nlfv::ops {
namespace {

void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ConfigError(message);
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, OpKind kind) {
    require(a.shape() == b.shape(), std::string(op_name(kind)) + ": shape mismatch " +
                                        shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

Tensor finish(OpKind kind, Shape shape, std::vector<float> values) {
    check_finite(values, kind, "value");
    return Tensor(std::move(shape), std::move(values));
}

// Shared implementation for unary elementwise ops: `fwd` maps x -> y and
// `deriv` maps (x, y) -> dy/dx.
template <typename Fwd, typename Deriv>
Tensor unary(Graph* graph, OpKind kind, const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        out[i] = fwd(xv[i]);
    }
    Tensor y = finish(kind, x.shape(), std::move(out));
    if (Graph::tracks(graph, {&x})) {
        graph->record(kind, {x}, y, [x, y, deriv]() mutable {
            const auto gy = y.grad();
            const auto xv = x.values();
            const auto yv = y.values();
            auto gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += gy[i] * deriv(xv[i], yv[i]);
            }
        });
    }
    return y;
}

} // namespace

Tensor fully_connected(Graph* graph, const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require(x.rank() == 1 && weight.rank() == 2 && bias.rank() == 1,
            "fully_connected: expected x[in], W[out x in], b[out]");
    const int in = x.dim(0);
    const int out_n = weight.dim(0);
    require(weight.dim(1) == in && bias.dim(0) == out_n,
            "fully_connected: shape mismatch x" + shape_string(x.shape()) + " W" +
                shape_string(weight.shape()) + " b" + shape_string(bias.shape()));

    const auto xv = x.values();
    const auto wv = weight.values();
    const auto bv = bias.values();
    std::vector<float> out(out_n);
    for (int o = 0; o < out_n; ++o) {
        float acc = bv[o];
        for (int i = 0; i < in; ++i) {
            acc += wv[o * in + i] * xv[i];
        }
        out[o] = acc;
    }
    Tensor y = finish(OpKind::FullyConnected, {out_n}, std::move(out));

    if (Graph::tracks(graph, {&x, &weight, &bias})) {
        graph->record(OpKind::FullyConnected, {x, weight, bias}, y, [x, weight, bias, y, in, out_n]() mutable {
            const auto gy = y.grad();
            if (x.requires_grad()) {
                auto gx = x.grad();
                const auto wv = weight.values();
                for (int o = 0; o < out_n; ++o) {
                    for (int i = 0; i < in; ++i) {
                        gx[i] += wv[o * in + i] * gy[o];
                    }
                }
            }
            if (weight.requires_grad()) {
                auto gw = weight.grad();
                const auto xv = x.values();
                for (int o = 0; o < out_n; ++o) {
                    for (int i = 0; i < in; ++i) {
                        gw[o * in + i] += gy[o] * xv[i];
                    }
                }
            }
            if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (int o = 0; o < out_n; ++o) {
                    gb[o] += gy[o];
                }
            }
        });
    }
    return y;
}

Tensor conv2d_same(Graph* graph, const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require(x.rank() == 3 && kernel.rank() == 4 && bias.rank() == 1,
            "conv2d_same: expected x[C x H x W], K[Cout x Cin x 3 x 3], b[Cout]");
    require(kernel.dim(2) == 3 && kernel.dim(3) == 3, "conv2d_same: kernel must be 3x3");
    const int cin = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int cout = kernel.dim(0);
    require(kernel.dim(1) == cin, "conv2d_same: channel mismatch, input has " + std::to_string(cin) +
                                      " channels but kernel expects " + std::to_string(kernel.dim(1)));
    require(bias.dim(0) == cout, "conv2d_same: bias size does not match output channels");

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* xv = x.values().data();
    const float* kv = kernel.values().data();
    const float* bv = bias.values().data();
    std::vector<float> out(static_cast<std::size_t>(cout) * plane);

    for (int co = 0; co < cout; ++co) {
        float* o = out.data() + co * plane;
        std::fill(o, o + plane, bv[co]);
        for (int ci = 0; ci < cin; ++ci) {
            const float* in = xv + ci * plane;
            const float* kk = kv + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int y_begin = std::max(0, 1 - ky);
                const int y_end = std::min(h, h + 1 - ky);
                for (int y = y_begin; y < y_end; ++y) {
                    const float* irow = in + (y + ky - 1) * w;
                    float* orow = o + y * w;
                    for (int kx = 0; kx < 3; ++kx) {
                        const float wt = kk[ky * 3 + kx];
                        const int dx = kx - 1;
                        const int x_begin = std::max(0, -dx);
                        const int x_end = std::min(w, w - dx);
                        for (int xx = x_begin; xx < x_end; ++xx) {
                            orow[xx] += wt * irow[xx + dx];
                        }
                    }
                }
            }
        }
    }
    Tensor y = finish(OpKind::Conv2dSame, {cout, h, w}, std::move(out));

    if (Graph::tracks(graph, {&x, &kernel, &bias})) {
        graph->record(OpKind::Conv2dSame, {x, kernel, bias}, y,
                      [x, kernel, bias, y, cin, cout, h, w, plane]() mutable {
            const float* gy = y.grad().data();
            const float* xv = x.values().data();
            const float* kv = kernel.values().data();
            float* gx = x.requires_grad() ? x.grad().data() : nullptr;
            float* gk = kernel.requires_grad() ? kernel.grad().data() : nullptr;

            for (int co = 0; co < cout; ++co) {
                const float* go = gy + co * plane;
                for (int ci = 0; ci < cin; ++ci) {
                    const float* in = xv + ci * plane;
                    const std::size_t kofs = (static_cast<std::size_t>(co) * cin + ci) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int y_begin = std::max(0, 1 - ky);
                        const int y_end = std::min(h, h + 1 - ky);
                        for (int kx = 0; kx < 3; ++kx) {
                            const int dx = kx - 1;
                            const int x_begin = std::max(0, -dx);
                            const int x_end = std::min(w, w - dx);
                            const float wt = kv[kofs + ky * 3 + kx];
                            float kacc = 0.0f;
                            for (int yy = y_begin; yy < y_end; ++yy) {
                                const int iy = yy + ky - 1;
                                const float* grow = go + yy * w;
                                const float* irow = in + iy * w;
                                if (gx != nullptr) {
                                    float* gxrow = gx + ci * plane + iy * w;
                                    for (int xx = x_begin; xx < x_end; ++xx) {
                                        gxrow[xx + dx] += wt * grow[xx];
                                    }
                                }
                                if (gk != nullptr) {
                                    float row = 0.0f;
                                    for (int xx = x_begin; xx < x_end; ++xx) {
                                        row += grow[xx] * irow[xx + dx];
                                    }
                                    kacc += row;
                                }
                            }
                            if (gk != nullptr) {
                                gk[kofs + ky * 3 + kx] += kacc;
                            }
                        }
                    }
                }
            }
            if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (int co = 0; co < cout; ++co) {
                    const float* go = gy + co * plane;
                    float acc = 0.0f;
                    for (std::size_t i = 0; i < plane; ++i) {
                        acc += go[i];
                    }
                    gb[co] += acc;
                }
            }
        });
    }
    return y;
}

Tensor upsample_nearest_x2(Graph* graph, const Tensor& x) {
    require(x.rank() == 3, "upsample_nearest_x2: expected C x H x W");
    const int c = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    const int h2 = 2 * h;
    const int w2 = 2 * w;
    const auto xv = x.values();
    std::vector<float> out(static_cast<std::size_t>(c) * h2 * w2);
    for (int ch = 0; ch < c; ++ch) {
        for (int yy = 0; yy < h2; ++yy) {
            const float* irow = xv.data() + (static_cast<std::size_t>(ch) * h + yy / 2) * w;
            float* orow = out.data() + (static_cast<std::size_t>(ch) * h2 + yy) * w2;
            for (int xx = 0; xx < w2; ++xx) {
                orow[xx] = irow[xx / 2];
            }
        }
    }
    Tensor y = finish(OpKind::UpsampleNearest2x, {c, h2, w2}, std::move(out));
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::UpsampleNearest2x, {x}, y, [x, y, c, h, w, h2, w2]() mutable {
            const auto gy = y.grad();
            auto gx = x.grad();
            for (int ch = 0; ch < c; ++ch) {
                for (int yy = 0; yy < h2; ++yy) {
                    float* grow = gx.data() + (static_cast<std::size_t>(ch) * h + yy / 2) * w;
                    const float* orow = gy.data() + (static_cast<std::size_t>(ch) * h2 + yy) * w2;
                    for (int xx = 0; xx < w2; ++xx) {
                        grow[xx / 2] += orow[xx];
                    }
                }
            }
        });
    }
    return y;
}

namespace {

struct BilinearTap {
    int x0, x1, y0, y1;
    float fx, fy;
    bool inside_x, inside_y;
};

inline BilinearTap bilinear_tap(float cx, float cy, int w, int h) {
    BilinearTap t{};
    const float max_x = static_cast<float>(w - 1);
    const float max_y = static_cast<float>(h - 1);
    t.inside_x = cx >= 0.0f && cx <= max_x;
    t.inside_y = cy >= 0.0f && cy <= max_y;
    const float xs = std::clamp(cx, 0.0f, max_x);
    const float ys = std::clamp(cy, 0.0f, max_y);
    t.x0 = static_cast<int>(std::floor(xs));
    t.y0 = static_cast<int>(std::floor(ys));
    t.x1 = std::min(t.x0 + 1, w - 1);
    t.y1 = std::min(t.y0 + 1, h - 1);
    t.fx = xs - static_cast<float>(t.x0);
    t.fy = ys - static_cast<float>(t.y0);
    return t;
}

} // namespace

Tensor grid_sample_bilinear(Graph* graph, const Tensor& image, const Tensor& coords) {
    require(image.rank() == 3, "grid_sample_bilinear: image must be C x H x W");
    require(coords.rank() == 3 && coords.dim(0) == 2, "grid_sample_bilinear: coords must be 2 x H x W");
    const int c = image.dim(0);
    const int h = image.dim(1);
    const int w = image.dim(2);
    const int ho = coords.dim(1);
    const int wo = coords.dim(2);
    require(h > 0 && w > 0, "grid_sample_bilinear: empty image");

    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
    const float* iv = image.values().data();
    const float* cx = coords.values().data();
    const float* cy = cx + out_plane;
    std::vector<float> out(static_cast<std::size_t>(c) * out_plane);

    for (std::size_t p = 0; p < out_plane; ++p) {
        const BilinearTap t = bilinear_tap(cx[p], cy[p], w, h);
        const float w00 = (1.0f - t.fx) * (1.0f - t.fy);
        const float w01 = t.fx * (1.0f - t.fy);
        const float w10 = (1.0f - t.fx) * t.fy;
        const float w11 = t.fx * t.fy;
        const std::size_t i00 = static_cast<std::size_t>(t.y0) * w + t.x0;
        const std::size_t i01 = static_cast<std::size_t>(t.y0) * w + t.x1;
        const std::size_t i10 = static_cast<std::size_t>(t.y1) * w + t.x0;
        const std::size_t i11 = static_cast<std::size_t>(t.y1) * w + t.x1;
        for (int ch = 0; ch < c; ++ch) {
            const float* src = iv + ch * in_plane;
            out[ch * out_plane + p] = w00 * src[i00] + w01 * src[i01] + w10 * src[i10] + w11 * src[i11];
        }
    }
    Tensor y = finish(OpKind::GridSampleBilinear, {c, ho, wo}, std::move(out));

    if (Graph::tracks(graph, {&image, &coords})) {
        graph->record(OpKind::GridSampleBilinear, {image, coords}, y,
                      [image, coords, y, c, h, w, in_plane, out_plane]() mutable {
            const float* gy = y.grad().data();
            const float* iv = image.values().data();
            const float* cx = coords.values().data();
            const float* cy = cx + out_plane;
            float* gi = image.requires_grad() ? image.grad().data() : nullptr;
            float* gc = coords.requires_grad() ? coords.grad().data() : nullptr;
            for (std::size_t p = 0; p < out_plane; ++p) {
                const BilinearTap t = bilinear_tap(cx[p], cy[p], w, h);
                const std::size_t i00 = static_cast<std::size_t>(t.y0) * w + t.x0;
                const std::size_t i01 = static_cast<std::size_t>(t.y0) * w + t.x1;
                const std::size_t i10 = static_cast<std::size_t>(t.y1) * w + t.x0;
                const std::size_t i11 = static_cast<std::size_t>(t.y1) * w + t.x1;
                float dx = 0.0f;
                float dy = 0.0f;
                for (int ch = 0; ch < c; ++ch) {
                    const float g = gy[ch * out_plane + p];
                    const float* src = iv + ch * in_plane;
                    if (gi != nullptr) {
                        float* dst = gi + ch * in_plane;
                        dst[i00] += g * (1.0f - t.fx) * (1.0f - t.fy);
                        dst[i01] += g * t.fx * (1.0f - t.fy);
                        dst[i10] += g * (1.0f - t.fx) * t.fy;
                        dst[i11] += g * t.fx * t.fy;
                    }
                    dx += g * ((1.0f - t.fy) * (src[i01] - src[i00]) + t.fy * (src[i11] - src[i10]));
                    dy += g * ((1.0f - t.fx) * (src[i10] - src[i00]) + t.fx * (src[i11] - src[i01]));
                }
                if (gc != nullptr) {
                    if (t.inside_x) {
                        gc[p] += dx;
                    }
                    if (t.inside_y) {
                        gc[out_plane + p] += dy;
                    }
                }
            }
        });
    }
    return y;
}

namespace {

template <typename Combine, typename Backward>
Tensor binary(Graph* graph, OpKind kind, const Tensor& a, const Tensor& b, Combine combine, Backward bwd) {
    require_same_shape(a, b, kind);
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<float> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = combine(av[i], bv[i]);
    }
    Tensor y = finish(kind, a.shape(), std::move(out));
    if (Graph::tracks(graph, {&a, &b})) {
        graph->record(kind, {a, b}, y, [a, b, y, bwd]() mutable { bwd(a, b, y); });
    }
    return y;
}

} // namespace

Tensor add(Graph* graph, const Tensor& a, const Tensor& b) {
    return binary(graph, OpKind::Add, a, b, [](float p, float q) { return p + q; },
                  [](const Tensor& a, const Tensor& b, const Tensor& y) {
                      const auto gy = y.grad();
                      if (a.requires_grad()) {
                          auto ga = a.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
                      }
                      if (b.requires_grad()) {
                          auto gb = b.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
                      }
                  });
}

Tensor subtract(Graph* graph, const Tensor& a, const Tensor& b) {
    return binary(graph, OpKind::Subtract, a, b, [](float p, float q) { return p - q; },
                  [](const Tensor& a, const Tensor& b, const Tensor& y) {
                      const auto gy = y.grad();
                      if (a.requires_grad()) {
                          auto ga = a.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
                      }
                      if (b.requires_grad()) {
                          auto gb = b.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
                      }
                  });
}

Tensor multiply(Graph* graph, const Tensor& a, const Tensor& b) {
    return binary(graph, OpKind::Multiply, a, b, [](float p, float q) { return p * q; },
                  [](const Tensor& a, const Tensor& b, const Tensor& y) {
                      const auto gy = y.grad();
                      const auto av = a.values();
                      const auto bv = b.values();
                      if (a.requires_grad()) {
                          auto ga = a.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
                      }
                      if (b.requires_grad()) {
                          auto gb = b.grad();
                          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
                      }
                  });
}

Tensor scale(Graph* graph, const Tensor& x, float factor) {
    return unary(
        graph, OpKind::Scale, x, [factor](float v) { return factor * v; },
        [factor](float, float) { return factor; });
}

Tensor scale_shift(Graph* graph, const Tensor& x, float factor, float offset) {
    return unary(
        graph, OpKind::ScaleShift, x, [factor, offset](float v) { return factor * v + offset; },
        [factor](float, float) { return factor; });
}

Tensor abs_val(Graph* graph, const Tensor& x) {
    return unary(
        graph, OpKind::AbsVal, x, [](float v) { return std::fabs(v); },
        [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor exp_neg(Graph* graph, const Tensor& x) {
    return unary(
        graph, OpKind::ExpNeg, x, [](float v) { return std::exp(-v); }, [](float, float y) { return -y; });
}

Tensor sigmoid(Graph* graph, const Tensor& x) {
    return unary(
        graph, OpKind::Sigmoid, x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
        [](float, float y) { return y * (1.0f - y); });
}

Tensor leaky_relu(Graph* graph, const Tensor& x, float slope) {
    return unary(
        graph, OpKind::LeakyRelu, x, [slope](float v) { return v > 0.0f ? v : slope * v; },
        [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

Tensor concat_channels(Graph* graph, std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw UsageError("concat_channels: no inputs");
    }
    Shape trailing(parts[0].shape().begin() + 1, parts[0].shape().end());
    int channels = 0;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.rank() == trailing.size() + 1 &&
                    std::equal(trailing.begin(), trailing.end(), p.shape().begin() + 1),
                "concat_channels: trailing dims differ " + shape_string(parts[0].shape()) + " vs " +
                    shape_string(p.shape()));
        channels += p.dim(0);
        total += p.numel();
    }
    std::vector<float> out;
    out.reserve(total);
    for (const auto& p : parts) {
        const auto v = p.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    Shape shape{channels};
    shape.insert(shape.end(), trailing.begin(), trailing.end());
    Tensor y = finish(OpKind::ConcatChannels, std::move(shape), std::move(out));

    bool any = false;
    for (const auto& p : parts) {
        any = any || p.requires_grad();
    }
    if (graph != nullptr && any) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        graph->record(OpKind::ConcatChannels, inputs, y, [inputs, y]() mutable {
            const auto gy = y.grad();
            std::size_t offset = 0;
            for (auto& p : inputs) {
                const std::size_t n = p.numel();
                if (p.requires_grad()) {
                    auto gp = p.grad();
                    for (std::size_t i = 0; i < n; ++i) {
                        gp[i] += gy[offset + i];
                    }
                }
                offset += n;
            }
        });
    }
    return y;
}

Tensor slice_channels(Graph* graph, const Tensor& x, int begin, int count) {
    require(x.rank() >= 1 && begin >= 0 && count >= 0 && begin + count <= x.dim(0),
            "slice_channels: range out of bounds for shape " + shape_string(x.shape()));
    const std::size_t per = x.numel() / static_cast<std::size_t>(std::max(1, x.dim(0)));
    const auto xv = x.values();
    std::vector<float> out(xv.begin() + begin * per, xv.begin() + (begin + count) * per);
    Shape shape = x.shape();
    shape[0] = count;
    Tensor y = finish(OpKind::SliceChannels, std::move(shape), std::move(out));
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::SliceChannels, {x}, y, [x, y, begin, per]() mutable {
            const auto gy = y.grad();
            auto gx = x.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) {
                gx[begin * per + i] += gy[i];
            }
        });
    }
    return y;
}

Tensor softmax_over_stack(Graph* graph, const Tensor& stack) {
    require(stack.rank() >= 1 && stack.dim(0) >= 1, "softmax_over_stack: empty stack");
    const int k = stack.dim(0);
    const std::size_t plane = stack.numel() / k;
    const auto sv = stack.values();
    std::vector<float> out(sv.size());
    for (std::size_t p = 0; p < plane; ++p) {
        float mx = sv[p];
        for (int i = 1; i < k; ++i) {
            mx = std::max(mx, sv[i * plane + p]);
        }
        float denom = 0.0f;
        for (int i = 0; i < k; ++i) {
            const float e = std::exp(sv[i * plane + p] - mx);
            out[i * plane + p] = e;
            denom += e;
        }
        for (int i = 0; i < k; ++i) {
            out[i * plane + p] /= denom;
        }
    }
    Tensor y = finish(OpKind::SoftmaxOverStack, stack.shape(), std::move(out));
    if (Graph::tracks(graph, {&stack})) {
        graph->record(OpKind::SoftmaxOverStack, {stack}, y, [stack, y, k, plane]() mutable {
            const auto gy = y.grad();
            const auto yv = y.values();
            auto gs = stack.grad();
            for (std::size_t p = 0; p < plane; ++p) {
                float dot = 0.0f;
                for (int i = 0; i < k; ++i) {
                    dot += yv[i * plane + p] * gy[i * plane + p];
                }
                for (int i = 0; i < k; ++i) {
                    gs[i * plane + p] += yv[i * plane + p] * (gy[i * plane + p] - dot);
                }
            }
        });
    }
    return y;
}

Tensor weighted_sum(Graph* graph, const Tensor& weights, std::span<const Tensor> values) {
    require(weights.rank() == 3, "weighted_sum: weights must be K x H x W");
    const int k = weights.dim(0);
    require(static_cast<std::size_t>(k) == values.size() && k >= 1,
            "weighted_sum: weight count does not match value count");
    const int h = weights.dim(1);
    const int w = weights.dim(2);
    const int c = values[0].dim(0);
    for (const auto& v : values) {
        require(v.rank() == 3 && v.dim(0) == c && v.dim(1) == h && v.dim(2) == w,
                "weighted_sum: value shape " + shape_string(v.shape()) + " incompatible with weights " +
                    shape_string(weights.shape()));
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const auto wv = weights.values();
    std::vector<float> out(static_cast<std::size_t>(c) * plane, 0.0f);
    for (int i = 0; i < k; ++i) {
        const auto vv = values[i].values();
        const float* wi = wv.data() + i * plane;
        for (int ch = 0; ch < c; ++ch) {
            for (std::size_t p = 0; p < plane; ++p) {
                out[ch * plane + p] += wi[p] * vv[ch * plane + p];
            }
        }
    }
    Tensor y = finish(OpKind::WeightedSum, {c, h, w}, std::move(out));

    bool any = weights.requires_grad();
    for (const auto& v : values) {
        any = any || v.requires_grad();
    }
    if (graph != nullptr && any) {
        std::vector<Tensor> inputs{weights};
        inputs.insert(inputs.end(), values.begin(), values.end());
        graph->record(OpKind::WeightedSum, inputs, y, [inputs, y, k, c, plane]() mutable {
            const auto gy = y.grad();
            Tensor& weights = inputs[0];
            const auto wv = weights.values();
            for (int i = 0; i < k; ++i) {
                Tensor& v = inputs[i + 1];
                const auto vv = v.values();
                const float* wi = wv.data() + i * plane;
                if (weights.requires_grad()) {
                    float* gw = weights.grad().data() + i * plane;
                    for (int ch = 0; ch < c; ++ch) {
                        for (std::size_t p = 0; p < plane; ++p) {
                            gw[p] += gy[ch * plane + p] * vv[ch * plane + p];
                        }
                    }
                }
                if (v.requires_grad()) {
                    auto gv = v.grad();
                    for (int ch = 0; ch < c; ++ch) {
                        for (std::size_t p = 0; p < plane; ++p) {
                            gv[ch * plane + p] += wi[p] * gy[ch * plane + p];
                        }
                    }
                }
            }
        });
    }
    return y;
}

Tensor reduce_mean_abs(Graph* graph, const Tensor& x) {
    require(x.numel() > 0, "reduce_mean_abs: empty tensor");
    const auto xv = x.values();
    double acc = 0.0;
    for (float v : xv) {
        acc += std::fabs(v);
    }
    const auto n = static_cast<double>(xv.size());
    Tensor y = finish(OpKind::ReduceMeanAbs, {1}, {static_cast<float>(acc / n)});
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::ReduceMeanAbs, {x}, y, [x, y, n]() mutable {
            const float g = y.grad()[0] / static_cast<float>(n);
            const auto xv = x.values();
            auto gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += xv[i] > 0.0f ? g : (xv[i] < 0.0f ? -g : 0.0f);
            }
        });
    }
    return y;
}

Tensor sum(Graph* graph, const Tensor& x) {
    double acc = 0.0;
    for (float v : x.values()) {
        acc += v;
    }
    Tensor y = finish(OpKind::Sum, {1}, {static_cast<float>(acc)});
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::Sum, {x}, y, [x, y]() mutable {
            const float g = y.grad()[0];
            for (float& gx : x.grad()) {
                gx += g;
            }
        });
    }
    return y;
}

Tensor reshape(Graph* graph, const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            "reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    const auto xv = x.values();
    Tensor y(std::move(shape), std::vector<float>(xv.begin(), xv.end()));
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::Reshape, {x}, y, [x, y]() mutable {
            const auto gy = y.grad();
            auto gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += gy[i];
            }
        });
    }
    return y;
}

Tensor crop_center(Graph* graph, const Tensor& x, int height, int width) {
    require(x.rank() == 3, "crop_center: expected C x H x W");
    const int c = x.dim(0);
    const int h = x.dim(1);
    const int w = x.dim(2);
    require(height >= 1 && width >= 1 && height <= h && width <= w,
            "crop_center: cannot crop " + shape_string(x.shape()) + " to " + std::to_string(height) + "x" +
                std::to_string(width));
    if (height == h && width == w) {
        return x;
    }
    const int oy = (h - height) / 2;
    const int ox = (w - width) / 2;
    const auto xv = x.values();
    std::vector<float> out(static_cast<std::size_t>(c) * height * width);
    for (int ch = 0; ch < c; ++ch) {
        for (int yy = 0; yy < height; ++yy) {
            const float* src = xv.data() + (static_cast<std::size_t>(ch) * h + yy + oy) * w + ox;
            std::copy(src, src + width, out.data() + (static_cast<std::size_t>(ch) * height + yy) * width);
        }
    }
    Tensor y(Shape{c, height, width}, std::move(out));
    if (Graph::tracks(graph, {&x})) {
        graph->record(OpKind::CropCenter, {x}, y, [x, y, c, h, w, height, width, oy, ox]() mutable {
            const auto gy = y.grad();
            auto gx = x.grad();
            for (int ch = 0; ch < c; ++ch) {
                for (int yy = 0; yy < height; ++yy) {
                    float* dst = gx.data() + (static_cast<std::size_t>(ch) * h + yy + oy) * w + ox;
                    const float* src = gy.data() + (static_cast<std::size_t>(ch) * height + yy) * width;
                    for (int xx = 0; xx < width; ++xx) {
                        dst[xx] += src[xx];
                    }
                }
            }
        });
    }
    return y;
}

Tensor offset_by_pixel_grid(Graph* graph, const Tensor& flow) {
    require(flow.rank() == 3 && flow.dim(0) == 2, "offset_by_pixel_grid: flow must be 2 x H x W");
    const int h = flow.dim(1);
    const int w = flow.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const auto fv = flow.values();
    std::vector<float> out(fv.size());
    for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
            const std::size_t p = static_cast<std::size_t>(yy) * w + xx;
            out[p] = fv[p] + static_cast<float>(xx);
            out[plane + p] = fv[plane + p] + static_cast<float>(yy);
        }
    }
    Tensor y = finish(OpKind::OffsetByPixelGrid, flow.shape(), std::move(out));
    if (Graph::tracks(graph, {&flow})) {
        graph->record(OpKind::OffsetByPixelGrid, {flow}, y, [flow, y]() mutable {
            const auto gy = y.grad();
            auto gf = flow.grad();
            for (std::size_t i = 0; i < gf.size(); ++i) {
                gf[i] += gy[i];
            }
        });
    }
    return y;
}

} // namespace nlfv::ops
