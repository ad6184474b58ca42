// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/adam.hpp"

#include <cmath>

#include "latsketch/error.hpp"

namespace latsketch::nn {

Adam::Adam(std::vector<Param*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    set_lr(config_.lr);
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        if (!p->grad.same_shape(p->value)) throw ShapeError("parameter " + p->name + " grad/value shape");
        m_.push_back(Tensor::zeros_like(p->value));
        v_.push_back(Tensor::zeros_like(p->value));
    }
}

void Adam::set_lr(double lr) {
    if (!(lr > 0.0)) throw UsageError("Adam learning rate must be > 0");
    config_.lr = lr;
}

void Adam::step() {
    for (const Param* p : params_) p->grad.check_finite("gradient of " + p->name);
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        if (p.grad.max_abs() == 0.0) continue;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.value[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        p.zero_grad();
    }
}

double warmup_lr(double base_lr, std::size_t step, std::size_t warmup) {
    if (warmup == 0 || step >= warmup) return base_lr;
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
}

}  // namespace latsketch::nn
