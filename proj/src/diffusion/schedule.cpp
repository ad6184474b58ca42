// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/diffusion/schedule.hpp"

#include <cmath>

#include "latsketch/error.hpp"

namespace latsketch::diffusion {

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::linear: return "linear";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    throw UsageError("unknown schedule kind '" + s + "'");
}

NoiseSchedule NoiseSchedule::make(const ScheduleSpec& spec) {
    if (spec.steps < 2) throw UsageError("schedule needs at least 2 steps");
    if (!(spec.beta_start > 0.0 && spec.beta_start <= spec.beta_end && spec.beta_end < 1.0)) {
        throw UsageError("schedule requires 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.spec_ = spec;
    const std::size_t n = spec.steps;
    s.betas_.resize(n);
    s.alpha_bars_.resize(n);
    s.sigmas_.resize(n);
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
        const double beta = spec.beta_start + (spec.beta_end - spec.beta_start) * frac;
        s.betas_[i] = beta;
        prod *= 1.0 - beta;
        s.alpha_bars_[i] = prod;
        s.sigmas_[i] = std::sqrt(beta);
    }
    return s;
}

NoiseSchedule NoiseSchedule::standard(std::size_t steps) {
    const double scale = 1000.0 / static_cast<double>(steps);
    return make({ScheduleKind::linear, steps, 1e-4 * scale, 0.02 * scale});
}

double NoiseSchedule::terminal_signal() const { return std::sqrt(alpha_bars_.back()); }

void NoiseSchedule::require_reaches_noise() const {
    if (!(terminal_signal() < 0.05)) {
        throw ModelError("schedule keeps sqrt(alpha_bar_T) = " + std::to_string(terminal_signal()) +
                         " >= 0.05; the chain does not reach noise");
    }
}

std::size_t NoiseSchedule::check(std::size_t t) const {
    if (t < 1 || t > spec_.steps) {
        throw UsageError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(spec_.steps) + "]");
    }
    return t - 1;
}

namespace {

// out = a * x + b * y, elementwise.
Tensor combine(double a, const Tensor& x, double b, const Tensor& y, const char* what) {
    nn::require_same_shape(x, y, what);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

}  // namespace

Tensor q_step(const Tensor& x_prev, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    const double beta = sched.beta(t);
    return combine(std::sqrt(1.0 - beta), x_prev, std::sqrt(beta), eps, "q_step");
}

Tensor q_sample(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    return combine(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps, "q_sample");
}

Tensor invert_q_sample(const Tensor& x_t, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    const double inv = 1.0 / std::sqrt(ab);
    return combine(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps, "invert_q_sample");
}

Tensor posterior_mean(const Tensor& x_t, std::size_t t, const Tensor& eps_hat, const NoiseSchedule& sched) {
    const double inv = 1.0 / std::sqrt(sched.alpha(t));
    const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
    return combine(inv, x_t, -coef * inv, eps_hat, "posterior_mean");
}

Tensor p_step(const Tensor& x_t, std::size_t t, const Tensor& eps_hat, const Tensor* z, const NoiseSchedule& sched) {
    Tensor mean = posterior_mean(x_t, t, eps_hat, sched);
    if (t == 1) {
        if (z && z->max_abs() != 0.0) throw UsageError("p_step: noise must be zero at t = 1");
        return mean;
    }
    if (!z) throw UsageError("p_step: noise required for t > 1");
    nn::require_same_shape(mean, *z, "p_step");
    const double sigma = sched.sigma(t);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += sigma * (*z)[i];
    return mean;
}

double ddpm_loss(const Tensor& eps, const Tensor& eps_hat) { return nn::mean_squared_error(eps, eps_hat); }

}  // namespace latsketch::diffusion
