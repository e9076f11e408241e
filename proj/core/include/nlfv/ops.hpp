// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/tensor.hpp"

#include <span>
#include <vector>

// Differentiable operations. Every op takes an optional Graph; when it is null,
// or no input requires grad, nothing is recorded and the op is a plain forward
// evaluation. Image-like tensors are planar C x H x W.
namespace nlfv::ops {

/// y = W x + b for x[in], W[out x in], b[out].
Tensor fully_connected(Graph* graph, const Tensor& x, const Tensor& weight, const Tensor& bias);

/// 3x3 cross-correlation, stride 1, zero padding 1.
/// x[Cin x H x W], kernel[Cout x Cin x 3 x 3], bias[Cout].
Tensor conv2d_same(Graph* graph, const Tensor& x, const Tensor& kernel, const Tensor& bias);

Tensor upsample_nearest_x2(Graph* graph, const Tensor& x);

/// Bilinear lookup of `image` at absolute pixel positions. coords[2 x H' x W']
/// holds (x_pix, y_pix); positions are clamped to the image border. The
/// backward pass produces gradients for both the image and the coordinates.
Tensor grid_sample_bilinear(Graph* graph, const Tensor& image, const Tensor& coords);

Tensor add(Graph* graph, const Tensor& a, const Tensor& b);
Tensor subtract(Graph* graph, const Tensor& a, const Tensor& b);
Tensor multiply(Graph* graph, const Tensor& a, const Tensor& b);
Tensor scale(Graph* graph, const Tensor& x, float factor);
/// factor * x + offset
Tensor scale_shift(Graph* graph, const Tensor& x, float factor, float offset);
/// |x|, with subgradient 0 at 0.
Tensor abs_val(Graph* graph, const Tensor& x);
/// exp(-x)
Tensor exp_neg(Graph* graph, const Tensor& x);
Tensor sigmoid(Graph* graph, const Tensor& x);
Tensor leaky_relu(Graph* graph, const Tensor& x, float slope);

/// Concatenates along the leading (channel) axis; trailing dims must agree.
Tensor concat_channels(Graph* graph, std::span<const Tensor> parts);
Tensor slice_channels(Graph* graph, const Tensor& x, int begin, int count);

/// Softmax across the leading K axis, independently for every pixel.
Tensor softmax_over_stack(Graph* graph, const Tensor& stack);

/// sum_k weights[k] (.) values[k] for weights[K x H x W] and values[k] of
/// shape C x H x W.
Tensor weighted_sum(Graph* graph, const Tensor& weights, std::span<const Tensor> values);

/// mean(|x|) as a scalar of shape [1].
Tensor reduce_mean_abs(Graph* graph, const Tensor& x);
Tensor sum(Graph* graph, const Tensor& x);

Tensor reshape(Graph* graph, const Tensor& x, Shape shape);
/// Center crop of the two trailing dims to height x width.
Tensor crop_center(Graph* graph, const Tensor& x, int height, int width);
/// flow[2 x H x W] + (x, y) pixel index grid, giving absolute sample positions.
Tensor offset_by_pixel_grid(Graph* graph, const Tensor& flow);

} // namespace nlfv::ops
