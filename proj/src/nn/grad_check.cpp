// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latsketch/error.hpp"

namespace latsketch::nn {

GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& backprop,
                           std::vector<GradProbe> probes, double h, Rng& rng, std::size_t samples) {
    if (!(h >= 1e-6 && h <= 1e-4)) throw UsageError("grad_check step h must lie in [1e-6, 1e-4]");
    backprop();
    // Grads are copied before perturbation runs overwrite any layer caches.
    std::vector<Tensor> analytic;
    analytic.reserve(probes.size());
    for (const GradProbe& p : probes) analytic.push_back(*p.grad);

    GradCheckResult result;
    for (std::size_t pi = 0; pi < probes.size(); ++pi) {
        Tensor& value = *probes[pi].value;
        std::vector<std::size_t> picks(value.size());
        std::iota(picks.begin(), picks.end(), std::size_t{0});
        if (picks.size() > samples) {
            for (std::size_t i = 0; i < samples; ++i) std::swap(picks[i], picks[i + rng.below(picks.size() - i)]);
            picks.resize(samples);
        }
        for (std::size_t k : picks) {
            const double saved = value[k];
            value[k] = saved + h;
            const double up = loss();
            value[k] = saved - h;
            const double down = loss();
            value[k] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][k];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double err = std::abs(a - numeric) / denom;
            ++result.checked;
            if (err > result.max_rel_error || result.worst.empty()) {
                result.max_rel_error = std::max(err, result.max_rel_error);
                result.worst = probes[pi].name + "[" + std::to_string(k) + "]";
            }
        }
    }
    return result;
}

GradCheckResult grad_check(Sequential& model, const Tensor& input, const OutputLoss& loss, double h, Rng& rng,
                           std::size_t samples) {
    Tensor x = input;
    Tensor dx;
    auto params = model.params();
    auto eval_loss = [&] { return loss(model.forward(x, Mode::train)).first; };
    auto backprop = [&] {
        zero_grads(params);
        Tensor y = model.forward(x, Mode::train);
        dx = model.backward(loss(y).second);
    };
    std::vector<GradProbe> probes;
    for (Param* p : params) probes.push_back({p->name, &p->value, &p->grad});
    probes.push_back({"input", &x, &dx});
    return grad_check(eval_loss, backprop, std::move(probes), h, rng, samples);
}

GradCheckResult grad_check(Layer& layer, const Tensor& input, const OutputLoss& loss, double h, Rng& rng,
                           std::size_t samples) {
    Tensor x = input;
    Tensor dx;
    auto params = layer.params();
    auto eval_loss = [&] { return loss(layer.forward(x, Mode::train)).first; };
    auto backprop = [&] {
        zero_grads(params);
        Tensor y = layer.forward(x, Mode::train);
        dx = layer.backward(loss(y).second);
    };
    std::vector<GradProbe> probes;
    for (Param* p : params) probes.push_back({p->name, &p->value, &p->grad});
    // Integer-valued inputs (ids, timesteps) have no meaningful input gradient.
    if (layer.kind() != LayerKind::embedding && layer.kind() != LayerKind::time_embed) {
        probes.push_back({"input", &x, &dx});
    }
    return grad_check(eval_loss, backprop, std::move(probes), h, rng, samples);
}

OutputLoss weighted_sum_loss(Tensor weights) {
    return [w = std::move(weights)](const Tensor& y) {
        require_same_shape(y, w, "weighted_sum_loss");
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
        return std::pair<double, Tensor>{s, w};
    };
}

}  // namespace latsketch::nn
