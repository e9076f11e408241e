// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/adam.hpp"

#include "nlfv/error.hpp"

#include <cmath>
#include <utility>

namespace nlfv {

AdamState AdamState::for_parameters(std::span<const Tensor> params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.numel(), 0.0f);
        state.second_moment.emplace_back(p.numel(), 0.0f);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, double learning_rate) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ConfigError("adam_step: optimizer state was built for " +
                          std::to_string(state.first_moment.size()) + " parameters, got " +
                          std::to_string(params.size()));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != p.numel() || v.size() != p.numel()) {
            throw ConfigError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
        }
        if (!p.has_grad()) {
            p.zero_grad();
        }
        auto values = p.values();
        const auto grad = std::as_const(p).grad();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grad[j];
            const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            const double update = learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + state.epsilon);
            values[j] = static_cast<float>(values[j] - update);
        }
    }
}

} // namespace nlfv
