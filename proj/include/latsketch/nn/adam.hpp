// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "latsketch/nn/layers.hpp"

namespace latsketch::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
///
/// A parameter tensor whose gradient is exactly zero is skipped entirely
/// (value and moments untouched), so zero gradients are a no-op for any
/// optimizer state. Gradients are zeroed after every step.
class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig config = {});

    void step();
    void set_lr(double lr);
    double lr() const noexcept { return config_.lr; }
    std::size_t step_count() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return config_; }

    const Tensor& first_moment(std::size_t i) const { return m_.at(i); }
    const Tensor& second_moment(std::size_t i) const { return v_.at(i); }

private:
    std::vector<Param*> params_;
    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<Tensor> m_, v_;
};

/// Linear warmup from 0: lr * s / warmup for s <= warmup, lr afterwards (s is 1-based).
double warmup_lr(double base_lr, std::size_t step, std::size_t warmup);

}  // namespace latsketch::nn
