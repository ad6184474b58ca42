// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "latsketch/backbone/bundle.hpp"
#include "latsketch/datagen/dataset.hpp"

namespace latsketch::backbone {

/// Called every `log_every` steps with (step, loss averaged since the last call).
using ProgressFn = std::function<void(std::size_t step, double loss)>;

struct AutoencoderTrainConfig {
    std::size_t steps = 10000;
    std::size_t batch = 16;
    double lr = 1e-3;
    double latent_l2 = 1e-4;
    std::size_t log_every = 500;
};

struct AutoencoderReport {
    std::vector<double> losses;  // per step
    double heldout_mse = 0.0;
    double heldout_psnr = 0.0;
    std::vector<double> latent_scale;
    std::vector<double> scaled_latent_std;  // per channel, training split
    double decode_probe = 0.0;
};

struct DenoiserTrainConfig {
    std::size_t steps = 30000;
    std::size_t batch = 16;
    double lr = 1e-3;
    double class_dropout = 0.1;  // probability of the null (zero) class vector
    double style_dropout = 0.3;  // probability of class-only conditioning
    std::size_t log_every = 500;
};

struct DenoiserReport {
    std::vector<double> losses;  // per step
    double heldout_loss_before = 0.0;
    double heldout_loss_after = 0.0;
    double mid_t_correlation = 0.0;  // mean per-sample corr(eps_hat, eps) at t = T/2
};

/// Stacked [N,3,S,S] images of the given items.
Tensor stack_images(const std::vector<const datagen::DataItem*>& items);

/// Trains the autoencoder on the train split, fits latent_scale, measures
/// held-out reconstruction, and marks the stage trained.
/// Throws NumericError on divergence.
AutoencoderReport train_autoencoder(BackboneBundle& bundle, const datagen::Dataset& data,
                                    const AutoencoderTrainConfig& cfg, nn::Rng rng, const ProgressFn& progress = {});

/// Trains the denoiser and conditioning table on frozen-autoencoder latents
/// with the noise-regression objective. Throws NumericError on divergence.
DenoiserReport train_denoiser(BackboneBundle& bundle, const datagen::Dataset& data, const DenoiserTrainConfig& cfg,
                              nn::Rng rng, const ProgressFn& progress = {});

/// Noise-regression loss of the current denoiser on the test split, one
/// draw of (t, eps) per item from `rng`, full class + style conditioning.
double denoiser_heldout_loss(const BackboneBundle& bundle, const datagen::Dataset& data, nn::Rng rng);

}  // namespace latsketch::backbone
