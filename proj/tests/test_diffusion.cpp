// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "latsketch/diffusion/schedule.hpp"
#include "latsketch/error.hpp"
#include "latsketch/nn/rng.hpp"

using namespace latsketch;
using namespace latsketch::diffusion;
using nn::Rng;
using nn::Tensor;

TEST_CASE("betas follow the linear ramp and alpha_bar is their running product") {
    for (std::size_t T : {2u, 10u, 100u, 1000u}) {
        const ScheduleSpec spec{ScheduleKind::linear, T, 1e-4, 0.02};
        const auto s = NoiseSchedule::make(spec);
        long double prod = 1.0L;
        for (std::size_t t = 1; t <= T; ++t) {
            const long double beta =
                1e-4L + (0.02L - 1e-4L) * static_cast<long double>(t - 1) / static_cast<long double>(T - 1);
            prod *= 1.0L - beta;
            CHECK(std::abs(s.beta(t) - static_cast<double>(beta)) < 1e-15);
            CHECK(std::abs(s.alpha(t) - (1.0 - s.beta(t))) < 1e-15);
            CHECK(std::abs(s.alpha_bar(t) - static_cast<double>(prod)) < 1e-12);
            CHECK(s.sigma(t) == doctest::Approx(std::sqrt(s.beta(t))).epsilon(1e-15));
        }
    }
}

TEST_CASE("schedule validation and the terminal-noise invariant") {
    CHECK_THROWS_AS(NoiseSchedule::make({ScheduleKind::linear, 1, 1e-4, 0.02}), UsageError);
    CHECK_THROWS_AS(NoiseSchedule::make({ScheduleKind::linear, 10, 0.0, 0.02}), UsageError);
    CHECK_THROWS_AS(NoiseSchedule::make({ScheduleKind::linear, 10, 0.03, 0.02}), UsageError);
    CHECK_THROWS_AS(NoiseSchedule::make({ScheduleKind::linear, 10, 1e-4, 1.0}), UsageError);
    const auto s = NoiseSchedule::make({ScheduleKind::linear, 10, 1e-4, 0.02});
    CHECK_THROWS_AS(s.beta(0), UsageError);
    CHECK_THROWS_AS(s.alpha_bar(11), UsageError);

    // Unscaled 1e-4..0.02 over 100 steps leaves most of the signal.
    const auto short_chain = NoiseSchedule::make({ScheduleKind::linear, 100, 1e-4, 0.02});
    CHECK(short_chain.terminal_signal() > 0.05);
    CHECK_THROWS_AS(short_chain.require_reaches_noise(), ModelError);

    for (std::size_t T : {50u, 100u, 250u, 1000u}) {
        const auto std_s = NoiseSchedule::standard(T);
        CHECK(std_s.spec().beta_start == doctest::Approx(1e-4 * 1000.0 / T));
        CHECK(std_s.spec().beta_end == doctest::Approx(0.02 * 1000.0 / T));
        CHECK(std_s.terminal_signal() < 0.05);
        CHECK_NOTHROW(std_s.require_reaches_noise());
    }
    CHECK(to_string(ScheduleKind::linear) == "linear");
    CHECK(schedule_kind_from_string("linear") == ScheduleKind::linear);
    CHECK_THROWS_AS(schedule_kind_from_string("cosine"), UsageError);
}

TEST_CASE("q_sample and its inverse round-trip exactly") {
    const auto s = NoiseSchedule::standard(100);
    Rng rng(11);
    double worst = 0.0;
    for (std::size_t t = 1; t <= 100; ++t) {
        const Tensor x0 = nn::randn({2, 4, 8, 8}, rng);
        const Tensor eps = nn::randn({2, 4, 8, 8}, rng);
        const Tensor xt = q_sample(x0, t, eps, s);
        // Closed form written out independently.
        const double ab = s.alpha_bar(t);
        for (std::size_t i = 0; i < xt.size(); i += 37)
            CHECK(std::abs(xt[i] - (std::sqrt(ab) * x0[i] + std::sqrt(1 - ab) * eps[i])) < 1e-14);
        worst = std::max(worst, (invert_q_sample(xt, t, eps, s) - x0).max_abs());
    }
    CHECK(worst < 1e-9);
    CHECK_THROWS_AS(q_sample(Tensor({2}), 1, Tensor({3}), s), ShapeError);
}

TEST_CASE("stepwise forward chain matches the closed-form marginal in mean and variance") {
    const auto s = NoiseSchedule::standard(100);
    constexpr std::size_t kSamples = 10000;
    Rng rng(12);
    const Tensor x0 = nn::randn({4, 8, 8}, rng) * 2.0;
    const std::size_t n = x0.size();
    for (std::size_t t : {1u, 10u, 40u, 100u}) {
        std::vector<double> m_chain(n, 0), m_closed(n, 0), q_chain(n, 0), q_closed(n, 0);
        Rng chain_rng = rng.substream("chain").substream(t), closed_rng = rng.substream("closed").substream(t);
        for (std::size_t k = 0; k < kSamples; ++k) {
            Tensor x = x0;
            for (std::size_t u = 1; u <= t; ++u) x = q_step(x, u, nn::randn(x0.shape(), chain_rng), s);
            const Tensor y = q_sample(x0, t, nn::randn(x0.shape(), closed_rng), s);
            for (std::size_t i = 0; i < n; ++i) {
                m_chain[i] += x[i];
                q_chain[i] += x[i] * x[i];
                m_closed[i] += y[i];
                q_closed[i] += y[i] * y[i];
            }
        }
        // Mean gaps are measured against the RMS magnitude of the marginal,
        // which stays well defined when the mean itself decays to zero.
        double dm = 0, second = 0, v_chain = 0, v_closed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = m_chain[i] / kSamples, b = m_closed[i] / kSamples;
            dm += (a - b) * (a - b);
            second += q_closed[i] / kSamples;
            v_chain += q_chain[i] / kSamples - a * a;
            v_closed += q_closed[i] / kSamples - b * b;
        }
        v_chain /= n;
        v_closed /= n;
        INFO("t = ", t);
        CHECK(std::sqrt(dm / second) < 0.02);
        CHECK(std::abs(v_chain - v_closed) / v_closed < 0.02);
        CHECK(std::abs(v_closed - (1 - s.alpha_bar(t))) / (1 - s.alpha_bar(t)) < 0.02);
    }
}

TEST_CASE("posterior mean equals exact inversion at t = 1 only") {
    const auto s = NoiseSchedule::standard(100);
    Rng rng(13);
    const Tensor x0 = nn::randn({4, 8, 8}, rng);
    const Tensor eps = nn::randn({4, 8, 8}, rng);

    const Tensor x1 = q_sample(x0, 1, eps, s);
    CHECK((posterior_mean(x1, 1, eps, s) - invert_q_sample(x1, 1, eps, s)).max_abs() < 1e-9);
    CHECK((posterior_mean(x1, 1, eps, s) - x0).max_abs() < 1e-9);

    // At t > 1 the mean is one reverse step, not a jump to x0.
    const std::size_t t = 50;
    const Tensor xt = q_sample(x0, t, eps, s);
    const Tensor mean = posterior_mean(xt, t, eps, s);
    CHECK((mean - invert_q_sample(xt, t, eps, s)).max_abs() > 0.1);
    const double a = s.alpha(t), ab = s.alpha_bar(t), b = s.beta(t);
    for (std::size_t i = 0; i < mean.size(); i += 13)
        CHECK(mean[i] == doctest::Approx((xt[i] - b / std::sqrt(1 - ab) * eps[i]) / std::sqrt(a)).epsilon(1e-12));
}

TEST_CASE("p_step adds sigma_t noise above t = 1 and none at t = 1") {
    const auto s = NoiseSchedule::standard(100);
    Rng rng(14);
    const Tensor x = nn::randn({4, 2, 2}, rng), e = nn::randn({4, 2, 2}, rng), z = nn::randn({4, 2, 2}, rng);
    const Tensor step = p_step(x, 7, e, &z, s);
    const Tensor expect = posterior_mean(x, 7, e, s) + z * s.sigma(7);
    CHECK((step - expect).max_abs() < 1e-14);
    CHECK((p_step(x, 1, e, nullptr, s) - posterior_mean(x, 1, e, s)).max_abs() == 0.0);
    CHECK_THROWS_AS(p_step(x, 7, e, nullptr, s), UsageError);
    CHECK_THROWS_AS(p_step(x, 1, e, &z, s), UsageError);
    const Tensor zero = Tensor::zeros_like(z);
    CHECK_NOTHROW(p_step(x, 1, e, &zero, s));
}

TEST_CASE("noise-regression loss is the mean squared error") {
    const Tensor a({4}, {1, 2, 3, 4}), b({4}, {1, 0, 3, 8});
    CHECK(ddpm_loss(a, b) == doctest::Approx((4.0 + 16.0) / 4.0));
}
