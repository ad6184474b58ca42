// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "latsketch/nn/sequential.hpp"

namespace latsketch::nn {

/// One tensor whose analytic gradient is compared against central differences.
struct GradProbe {
    std::string name;
    Tensor* value;
    const Tensor* grad;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "<probe>[<index>]" of the largest error
};

/// Loss on a model output: returns the scalar and dLoss/dOutput.
using OutputLoss = std::function<std::pair<double, Tensor>(const Tensor&)>;

/// Generic harness. `loss` runs a train-mode forward and returns the scalar;
/// `backprop` runs forward + backward so that every probe's grad is filled.
/// Up to `samples` entries per probe are perturbed by +-h; the error is
/// |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& backprop,
                           std::vector<GradProbe> probes, double h, Rng& rng, std::size_t samples = 16);

/// Checks every parameter of `model` and the input gradient.
GradCheckResult grad_check(Sequential& model, const Tensor& input, const OutputLoss& loss, double h, Rng& rng,
                           std::size_t samples = 16);

/// Single-layer convenience wrapper (same semantics).
GradCheckResult grad_check(Layer& layer, const Tensor& input, const OutputLoss& loss, double h, Rng& rng,
                           std::size_t samples = 16);

/// sum(weights * output): a loss whose output gradient is `weights`.
OutputLoss weighted_sum_loss(Tensor weights);

}  // namespace latsketch::nn
