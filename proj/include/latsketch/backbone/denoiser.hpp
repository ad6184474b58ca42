// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "latsketch/nn/layers.hpp"

namespace latsketch::backbone {

using nn::Mode;
using nn::Tensor;

struct DenoiserConfig {
    std::size_t latent_channels = 4;
    std::size_t latent_size = 8;
    std::size_t base_channels = 32;  // 8x8 resolution
    std::size_t mid_channels = 64;   // 4x4 and 2x2 resolutions
    std::size_t cond_dim = 64;
    std::size_t groups = 8;
};

/// conv-GN-ReLU, + Linear(h) broadcast over space, conv-GN-ReLU.
/// The convs carry no bias: group-norm would cancel it.
class UNetBlock {
public:
    UNetBlock(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t cond_dim,
              std::size_t groups, nn::Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& h, Mode mode);
    Tensor infer(const Tensor& x, const Tensor& h) const;
    /// Returns (grad wrt x, grad wrt h).
    std::pair<Tensor, Tensor> backward(const Tensor& grad_out);

    std::vector<nn::Param*> params();
    std::size_t out_channels() const { return conv2_.out_channels(); }

private:
    nn::Conv2d conv1_;
    nn::GroupNorm norm1_;
    nn::ReLU act1_;
    nn::Linear proj_;
    nn::Conv2d conv2_;
    nn::GroupNorm norm2_;
    nn::ReLU act2_;
};

struct Tap {
    std::string name;
    Tensor value;  // [N, C, h, w]
};

struct DenoiseOutput {
    Tensor eps;
    std::vector<Tap> taps;  // empty unless requested
};

/// Conditional U-Net over [N,4,8,8] latents: two down blocks, a 2x2
/// bottleneck, two up blocks with skip concatenation. Every block also
/// receives h = MLP(sinusoidal(t)) + cond through its projection. Each block
/// output is exposed as a named tap.
class Denoiser {
public:
    Denoiser(const DenoiserConfig& config, nn::Rng& rng);

    const DenoiserConfig& config() const noexcept { return config_; }

    /// Train-mode forward; `t` has one entry per batch item, `cond` is [N, cond_dim].
    Tensor forward(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond);
    /// Backpropagates dLoss/d(eps_hat); returns dLoss/d(cond).
    Tensor backward(const Tensor& grad_eps);
    /// Grad wrt the latent input from the most recent backward.
    const Tensor& input_grad() const noexcept { return grad_input_; }

    DenoiseOutput infer(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond, bool want_taps) const;

    static const std::vector<std::string>& tap_names();
    std::vector<std::size_t> tap_channels() const;

    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;

private:
    void check_inputs(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond) const;

    DenoiserConfig config_;
    nn::TimeEmbed time_embed_;
    nn::Linear time1_;
    nn::ReLU time_act_;
    nn::Linear time2_;
    nn::Conv2d in_conv_;
    UNetBlock down1_;
    nn::Conv2d downsample1_;
    UNetBlock down2_;
    nn::Conv2d downsample2_;
    UNetBlock mid_;
    nn::BilinearResize upsample1_;
    UNetBlock up1_;
    nn::BilinearResize upsample2_;
    UNetBlock up2_;
    nn::Conv2d out_conv_;

    std::size_t skip1_channels_ = 0, skip2_channels_ = 0;
    Tensor grad_input_;
};

}  // namespace latsketch::backbone
