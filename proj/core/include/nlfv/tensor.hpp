// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nlfv {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense float32 array with an optional gradient slot.
///
/// Tensor is a shared handle: copies alias the same storage, which is what
/// lets a Graph record references to intermediate values and later write their
/// gradients. Use clone() for a deep copy.
class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<float> values();
    std::span<const float> values() const;
    float item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    bool has_grad() const;
    /// Allocates a zero gradient if none exists yet. Gradient storage is
    /// shared by all handles, so this is available on const handles too.
    std::span<float> grad() const;
    void zero_grad();
    void clear_grad();

    Tensor clone() const;
    /// A copy that is not attached to any graph and does not require grad.
    Tensor detach() const;

    bool is(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    struct Impl {
        Shape shape;
        std::vector<float> values;
        std::vector<float> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

enum class OpKind {
    FullyConnected,
    Conv2dSame,
    UpsampleNearest2x,
    GridSampleBilinear,
    Add,
    Subtract,
    Multiply,
    Scale,
    ScaleShift,
    AbsVal,
    ExpNeg,
    Sigmoid,
    LeakyRelu,
    ConcatChannels,
    SliceChannels,
    SoftmaxOverStack,
    WeightedSum,
    ReduceMeanAbs,
    Sum,
    Reshape,
    CropCenter,
    OffsetByPixelGrid,
};

std::string_view op_name(OpKind kind);

/// Tape of differentiable operations, rebuilt for every forward pass.
class Graph {
  public:
    struct Record {
        OpKind kind;
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void()> backward;
    };

    /// True when an op over `inputs` must be recorded.
    static bool tracks(const Graph* graph, std::initializer_list<const Tensor*> inputs);

    void record(OpKind kind, std::vector<Tensor> inputs, Tensor output,
                std::function<void()> backward);

    /// Reverse sweep from a scalar loss. Gradients of every tensor touched by
    /// the graph are zeroed first, then accumulated.
    void backward(const Tensor& loss);

    std::size_t size() const { return records_.size(); }
    std::span<const Record> records() const { return records_; }
    void clear() { records_.clear(); }

  private:
    std::vector<Record> records_;
};

/// Throws NumericFault naming `kind` if any value is not finite.
void check_finite(std::span<const float> values, OpKind kind, std::string_view what);

} // namespace nlfv
