// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nlfv {

struct AdamState {
    std::vector<std::vector<float>> first_moment;
    std::vector<std::vector<float>> second_moment;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Zeroed moments sized to `params`.
    static AdamState for_parameters(std::span<const Tensor> params);
};

/// One bias-corrected Adam update of every parameter from its stored gradient.
/// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double learning_rate);

} // namespace nlfv
