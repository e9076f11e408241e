// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/tensor.hpp"

#include "nlfv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace nlfv {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) {
            throw ConfigError("negative dimension in shape " + shape_string(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            s += ",";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
    if (shape_numel(shape) != values.size()) {
        throw ConfigError("tensor shape " + shape_string(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

int Tensor::dim(std::size_t axis) const {
    if (axis >= impl_->shape.size()) {
        throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " +
                          shape_string(impl_->shape));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->values.size(); }

std::span<float> Tensor::values() { return impl_->values; }
std::span<const float> Tensor::values() const { return impl_->values; }

float Tensor::item() const {
    if (numel() != 1) {
        throw UsageError("item() on tensor of shape " + shape_string(shape()));
    }
    return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl_->requires_grad = flag; }

bool Tensor::has_grad() const { return impl_->grad.size() == impl_->values.size(); }

std::span<float> Tensor::grad() const {
    if (impl_->grad.size() != impl_->values.size()) {
        impl_->grad.assign(impl_->values.size(), 0.0f);
    }
    return impl_->grad;
}

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->values.size(), 0.0f);
}

void Tensor::clear_grad() {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
    Tensor t(impl_->shape, impl_->values, impl_->requires_grad);
    t.impl_->grad = impl_->grad;
    return t;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->values, false); }

std::string_view op_name(OpKind kind) {
    switch (kind) {
    case OpKind::FullyConnected: return "fully_connected";
    case OpKind::Conv2dSame: return "conv2d_same";
    case OpKind::UpsampleNearest2x: return "upsample_nearest_x2";
    case OpKind::GridSampleBilinear: return "grid_sample_bilinear";
    case OpKind::Add: return "add";
    case OpKind::Subtract: return "subtract";
    case OpKind::Multiply: return "multiply";
    case OpKind::Scale: return "scale";
    case OpKind::ScaleShift: return "scale_shift";
    case OpKind::AbsVal: return "abs_val";
    case OpKind::ExpNeg: return "exp_neg";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::SliceChannels: return "slice_channels";
    case OpKind::SoftmaxOverStack: return "softmax_over_stack";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::ReduceMeanAbs: return "reduce_mean_abs";
    case OpKind::Sum: return "sum";
    case OpKind::Reshape: return "reshape";
    case OpKind::CropCenter: return "crop_center";
    case OpKind::OffsetByPixelGrid: return "offset_by_pixel_grid";
    }
    return "unknown";
}

void check_finite(std::span<const float> values, OpKind kind, std::string_view what) {
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw NumericFault("non-finite " + std::string(what) + " in " + std::string(op_name(kind)));
        }
    }
}

bool Graph::tracks(const Graph* graph, std::initializer_list<const Tensor*> inputs) {
    if (graph == nullptr) {
        return false;
    }
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Graph::record(OpKind kind, std::vector<Tensor> inputs, Tensor output, std::function<void()> backward) {
    output.set_requires_grad(true);
    records_.push_back(Record{kind, std::move(inputs), std::move(output), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw UsageError("backward requires a scalar loss");
    }

    // Zero every gradient reachable through the tape.
    for (auto& rec : records_) {
        rec.output.zero_grad();
        for (auto& in : rec.inputs) {
            if (in.requires_grad()) {
                in.zero_grad();
            }
        }
    }

    Tensor root = loss;
    if (!root.requires_grad()) {
        throw UsageError("loss does not depend on any tensor that requires grad");
    }
    root.zero_grad();
    root.grad()[0] = 1.0f;

    const bool is_leaf = std::none_of(records_.begin(), records_.end(),
                                      [&](const Record& r) { return r.output.is(loss); });
    if (is_leaf) {
        return;
    }

    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        it->backward();
        for (const auto& in : it->inputs) {
            if (in.requires_grad()) {
                check_finite(in.grad(), it->kind, "gradient");
            }
        }
    }
}

} // namespace nlfv
