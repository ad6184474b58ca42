// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "latsketch/nn/tensor.hpp"

namespace latsketch::diffusion {

using nn::Tensor;

enum class ScheduleKind { linear };

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::linear;
    std::size_t steps = 100;
    double beta_start = 1e-3;
    double beta_end = 0.2;
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

/// DDPM noise tables, 1-based in t. Immutable once built; only the ScheduleSpec is
/// ever serialized and the tables are rederived from it.
class NoiseSchedule {
public:
    /// Throws UsageError unless 0 < beta_start <= beta_end < 1 and steps >= 2.
    static NoiseSchedule make(const ScheduleSpec& spec);

    /// The standard linear 1e-4 -> 0.02 schedule defined for 1000 steps,
    /// with both endpoints rescaled by 1000/T so shorter chains still end
    /// near pure noise.
    static NoiseSchedule standard(std::size_t steps);

    const ScheduleSpec& spec() const noexcept { return spec_; }
    std::size_t steps() const noexcept { return spec_.steps; }

    double beta(std::size_t t) const { return betas_.at(check(t)); }
    double alpha(std::size_t t) const { return 1.0 - beta(t); }
    double alpha_bar(std::size_t t) const { return alpha_bars_.at(check(t)); }
    /// Fixed reverse-step standard deviation, sqrt(beta_t).
    double sigma(std::size_t t) const { return sigmas_.at(check(t)); }

    /// sqrt(alpha_bar_T): the signal fraction left at the end of the chain.
    double terminal_signal() const;
    /// Throws ModelError if sqrt(alpha_bar_T) >= 0.05 (chain does not reach noise).
    void require_reaches_noise() const;

private:
    std::size_t check(std::size_t t) const;

    ScheduleSpec spec_;
    std::vector<double> betas_;       // index t-1
    std::vector<double> alpha_bars_;  // index t-1
    std::vector<double> sigmas_;      // index t-1
};

/// One forward step: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * eps.
Tensor q_step(const Tensor& x_prev, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

/// Closed-form marginal: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
Tensor q_sample(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

/// Exact algebraic inverse of q_sample given the same eps.
Tensor invert_q_sample(const Tensor& x_t, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

/// Reverse-step mean from predicted noise:
/// (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t).
/// Coincides with invert_q_sample only at t = 1.
Tensor posterior_mean(const Tensor& x_t, std::size_t t, const Tensor& eps_hat, const NoiseSchedule& sched);

/// Ancestral step x_{t-1} = posterior_mean + sigma_t * z. `z` must be given
/// for t > 1; at t = 1 it must be null or all zeros.
Tensor p_step(const Tensor& x_t, std::size_t t, const Tensor& eps_hat, const Tensor* z, const NoiseSchedule& sched);

/// Mean squared error between true and predicted noise.
double ddpm_loss(const Tensor& eps, const Tensor& eps_hat);

}  // namespace latsketch::diffusion
