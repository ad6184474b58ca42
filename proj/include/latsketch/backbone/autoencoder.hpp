// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "latsketch/nn/sequential.hpp"

namespace latsketch::backbone {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

struct AutoencoderConfig {
    std::size_t image_channels = 3;
    std::size_t image_size = 32;
    std::size_t latent_channels = 4;
    std::size_t width1 = 16;  // channels at full and half resolution
    std::size_t width2 = 32;  // channels at quarter resolution
};

/// Deterministic conv autoencoder, image [N,3,32,32] <-> latent [N,4,8,8].
///
/// The encoder downsamples twice with stride-2 convs; the decoder mirrors it
/// with bilinear upsampling. `latent_scale` multiplies raw encoder output
/// per channel so that training latents have unit standard deviation.
class Autoencoder {
public:
    Autoencoder(const AutoencoderConfig& config, nn::Rng& rng);

    const AutoencoderConfig& config() const noexcept { return config_; }
    std::size_t latent_size() const noexcept { return config_.image_size / 4; }

    // Raw (unscaled) paths used during training.
    Tensor encode_raw(const Tensor& images, Mode mode);
    Tensor decode_raw(const Tensor& latents, Mode mode);
    Tensor backward_decoder(const Tensor& grad);
    Tensor backward_encoder(const Tensor& grad);

    /// Scaled latents; eval mode, const.
    Tensor encode(const Tensor& images) const;
    /// Inverse scaling, decode, clamp to [0, 1].
    Tensor decode(const Tensor& latents) const;
    /// Decode without the clamp (used by probes that need the raw output).
    Tensor decode_unclamped(const Tensor& latents) const;

    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;

    std::vector<double> latent_scale;

private:
    AutoencoderConfig config_;
    nn::Sequential encoder_;
    nn::Sequential decoder_;
};

}  // namespace latsketch::backbone
