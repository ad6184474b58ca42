// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/backbone/autoencoder.hpp"

#include <algorithm>

#include "latsketch/error.hpp"

namespace latsketch::backbone {

using nn::BilinearResize;
using nn::Conv2d;
using nn::ReLU;

Autoencoder::Autoencoder(const AutoencoderConfig& config, nn::Rng& rng)
    : latent_scale(config.latent_channels, 1.0), config_(config) {
    if (config.image_size % 4 != 0) throw UsageError("autoencoder image size must be divisible by 4");
    const std::size_t w1 = config.width1, w2 = config.width2, s = config.image_size;
    nn::Rng init = rng.substream("autoencoder");

    encoder_.add<Conv2d>("encoder.conv0", config.image_channels, w1, 1, true, init);
    encoder_.add<ReLU>("encoder.relu0");
    encoder_.add<Conv2d>("encoder.down1", w1, w1, 2, true, init);
    encoder_.add<ReLU>("encoder.relu1");
    encoder_.add<Conv2d>("encoder.conv2", w1, w2, 1, true, init);
    encoder_.add<ReLU>("encoder.relu2");
    encoder_.add<Conv2d>("encoder.down3", w2, w2, 2, true, init);
    encoder_.add<ReLU>("encoder.relu3");
    encoder_.add<Conv2d>("encoder.out", w2, config.latent_channels, 1, true, init);

    decoder_.add<Conv2d>("decoder.in", config.latent_channels, w2, 1, true, init);
    decoder_.add<ReLU>("decoder.relu0");
    decoder_.add<Conv2d>("decoder.conv1", w2, w2, 1, true, init);
    decoder_.add<ReLU>("decoder.relu1");
    decoder_.add<BilinearResize>("decoder.up2", s / 2, s / 2);
    decoder_.add<Conv2d>("decoder.conv2", w2, w1, 1, true, init);
    decoder_.add<ReLU>("decoder.relu2");
    decoder_.add<BilinearResize>("decoder.up3", s, s);
    decoder_.add<Conv2d>("decoder.conv3", w1, w1, 1, true, init);
    decoder_.add<ReLU>("decoder.relu3");
    decoder_.add<Conv2d>("decoder.out", w1, config.image_channels, 1, true, init);
}

Tensor Autoencoder::encode_raw(const Tensor& images, Mode mode) { return encoder_.forward(images, mode); }
Tensor Autoencoder::decode_raw(const Tensor& latents, Mode mode) { return decoder_.forward(latents, mode); }
Tensor Autoencoder::backward_decoder(const Tensor& grad) { return decoder_.backward(grad); }
Tensor Autoencoder::backward_encoder(const Tensor& grad) { return encoder_.backward(grad); }

namespace {

Tensor scale_channels(Tensor z, const std::vector<double>& scale, bool inverse) {
    if (z.rank() != 4 || z.dim(1) != scale.size()) throw ShapeError("latent " + nn::shape_str(z.shape()));
    const std::size_t n = z.dim(0), c = z.dim(1), hw = z.dim(2) * z.dim(3);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double f = inverse ? 1.0 / scale[k] : scale[k];
            double* p = z.raw() + (b * c + k) * hw;
            for (std::size_t i = 0; i < hw; ++i) p[i] *= f;
        }
    return z;
}

}  // namespace

Tensor Autoencoder::encode(const Tensor& images) const {
    return scale_channels(encoder_.infer(images), latent_scale, false);
}

Tensor Autoencoder::decode_unclamped(const Tensor& latents) const {
    return decoder_.infer(scale_channels(latents, latent_scale, true));
}

Tensor Autoencoder::decode(const Tensor& latents) const {
    Tensor img = decode_unclamped(latents);
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

std::vector<nn::Param*> Autoencoder::params() {
    auto out = encoder_.params();
    auto dec = decoder_.params();
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

std::vector<const nn::Param*> Autoencoder::params() const {
    auto ps = const_cast<Autoencoder*>(this)->params();
    return {ps.begin(), ps.end()};
}

}  // namespace latsketch::backbone
