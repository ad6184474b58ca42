// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/backbone/denoiser.hpp"

#include "latsketch/error.hpp"

namespace latsketch::backbone {

namespace {

// x[n, c, :, :] += p[n, c]
void add_broadcast(Tensor& x, const Tensor& p) {
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double v = p[b * c + k];
            double* row = x.raw() + (b * c + k) * hw;
            for (std::size_t i = 0; i < hw; ++i) row[i] += v;
        }
}

Tensor spatial_sum(const Tensor& g) {
    const std::size_t n = g.dim(0), c = g.dim(1), hw = g.dim(2) * g.dim(3);
    Tensor out({n, c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double* row = g.raw() + (b * c + k) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += row[i];
            out[b * c + k] = s;
        }
    return out;
}

void append(std::vector<nn::Param*>& out, std::vector<nn::Param*> more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace

UNetBlock::UNetBlock(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t cond_dim,
                     std::size_t groups, nn::Rng& rng)
    : conv1_(name + ".conv1", in_ch, out_ch, 1, false, rng),
      norm1_(name + ".norm1", out_ch, groups),
      act1_(name + ".act1"),
      proj_(name + ".proj", cond_dim, out_ch, rng, 0.02),
      conv2_(name + ".conv2", out_ch, out_ch, 1, false, rng),
      norm2_(name + ".norm2", out_ch, groups),
      act2_(name + ".act2") {}

Tensor UNetBlock::forward(const Tensor& x, const Tensor& h, Mode mode) {
    if (mode == Mode::eval) return infer(x, h);
    Tensor a = act1_.forward(norm1_.forward(conv1_.forward(x, mode), mode), mode);
    add_broadcast(a, proj_.forward(h, mode));
    return act2_.forward(norm2_.forward(conv2_.forward(a, mode), mode), mode);
}

Tensor UNetBlock::infer(const Tensor& x, const Tensor& h) const {
    Tensor a = act1_.infer(norm1_.infer(conv1_.infer(x)));
    add_broadcast(a, proj_.infer(h));
    return act2_.infer(norm2_.infer(conv2_.infer(a)));
}

std::pair<Tensor, Tensor> UNetBlock::backward(const Tensor& grad_out) {
    Tensor ga = conv2_.backward(norm2_.backward(act2_.backward(grad_out)));
    Tensor gh = proj_.backward(spatial_sum(ga));
    Tensor gx = conv1_.backward(norm1_.backward(act1_.backward(ga)));
    return {std::move(gx), std::move(gh)};
}

std::vector<nn::Param*> UNetBlock::params() {
    std::vector<nn::Param*> out;
    append(out, conv1_.params());
    append(out, norm1_.params());
    append(out, proj_.params());
    append(out, conv2_.params());
    append(out, norm2_.params());
    return out;
}

Denoiser::Denoiser(const DenoiserConfig& config, nn::Rng& rng)
    : config_(config),
      time_embed_("denoiser.time_embed", config.cond_dim),
      time1_("denoiser.time1", config.cond_dim, config.cond_dim, rng),
      time_act_("denoiser.time_act"),
      time2_("denoiser.time2", config.cond_dim, config.cond_dim, rng),
      in_conv_("denoiser.in_conv", config.latent_channels, config.base_channels, 1, false, rng),
      down1_("denoiser.down1", config.base_channels, config.base_channels, config.cond_dim, config.groups, rng),
      downsample1_("denoiser.downsample1", config.base_channels, config.base_channels, 2, false, rng),
      down2_("denoiser.down2", config.base_channels, config.mid_channels, config.cond_dim, config.groups, rng),
      downsample2_("denoiser.downsample2", config.mid_channels, config.mid_channels, 2, false, rng),
      mid_("denoiser.mid", config.mid_channels, config.mid_channels, config.cond_dim, config.groups, rng),
      upsample1_("denoiser.upsample1", config.latent_size / 2, config.latent_size / 2),
      up1_("denoiser.up1", 2 * config.mid_channels, config.mid_channels, config.cond_dim, config.groups, rng),
      upsample2_("denoiser.upsample2", config.latent_size, config.latent_size),
      up2_("denoiser.up2", config.mid_channels + config.base_channels, config.base_channels, config.cond_dim,
           config.groups, rng),
      out_conv_("denoiser.out_conv", config.base_channels, config.latent_channels, 1, true, rng, 0.01) {
    if (config.latent_size % 4 != 0) throw UsageError("denoiser latent size must be divisible by 4");
}

const std::vector<std::string>& Denoiser::tap_names() {
    static const std::vector<std::string> names = {"down1", "down2", "mid", "up1", "up2"};
    return names;
}

std::vector<std::size_t> Denoiser::tap_channels() const {
    return {config_.base_channels, config_.mid_channels, config_.mid_channels, config_.mid_channels,
            config_.base_channels};
}

void Denoiser::check_inputs(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond) const {
    const std::size_t s = config_.latent_size;
    if (z_t.rank() != 4 || z_t.dim(1) != config_.latent_channels || z_t.dim(2) != s || z_t.dim(3) != s) {
        throw ShapeError("denoiser expects [N, " + std::to_string(config_.latent_channels) + ", " +
                         std::to_string(s) + ", " + std::to_string(s) + "], got " + nn::shape_str(z_t.shape()));
    }
    if (t.size() != z_t.dim(0)) throw ShapeError("denoiser needs one timestep per batch item");
    for (double v : t) {
        if (v < 0.0 || v != static_cast<double>(static_cast<long long>(v))) {
            throw UsageError("denoiser timestep must be a non-negative integer");
        }
    }
    if (cond.shape() != nn::Shape{z_t.dim(0), config_.cond_dim}) {
        throw ShapeError("denoiser cond " + nn::shape_str(cond.shape()));
    }
}

Tensor Denoiser::forward(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond) {
    check_inputs(z_t, t, cond);
    const Mode m = Mode::train;
    Tensor h = time2_.forward(time_act_.forward(time1_.forward(time_embed_.forward(Tensor({t.size()}, t), m), m), m),
                              m);
    h += cond;

    Tensor x0 = in_conv_.forward(z_t, m);
    Tensor d1 = down1_.forward(x0, h, m);
    Tensor d2 = down2_.forward(downsample1_.forward(d1, m), h, m);
    Tensor mid = mid_.forward(downsample2_.forward(d2, m), h, m);
    Tensor u1 = up1_.forward(nn::concat_channels(upsample1_.forward(mid, m), d2), h, m);
    Tensor u2 = up2_.forward(nn::concat_channels(upsample2_.forward(u1, m), d1), h, m);
    skip1_channels_ = d1.dim(1);
    skip2_channels_ = d2.dim(1);
    Tensor eps = out_conv_.forward(u2, m);
    eps.check_finite("denoiser output");
    return eps;
}

Tensor Denoiser::backward(const Tensor& grad_eps) {
    Tensor g_up, g_skip1, g_skip2;

    auto [g_cat2, gh5] = up2_.backward(out_conv_.backward(grad_eps));
    nn::split_channels(g_cat2, g_cat2.dim(1) - skip1_channels_, g_up, g_skip1);
    auto [g_cat1, gh4] = up1_.backward(upsample2_.backward(g_up));
    nn::split_channels(g_cat1, g_cat1.dim(1) - skip2_channels_, g_up, g_skip2);
    auto [g_x2, gh3] = mid_.backward(upsample1_.backward(g_up));
    Tensor g_d2 = downsample2_.backward(g_x2);
    g_d2 += g_skip2;
    auto [g_x1, gh2] = down2_.backward(g_d2);
    Tensor g_d1 = downsample1_.backward(g_x1);
    g_d1 += g_skip1;
    auto [g_x0, gh1] = down1_.backward(g_d1);
    grad_input_ = in_conv_.backward(g_x0);

    Tensor gh = gh1;
    gh += gh2;
    gh += gh3;
    gh += gh4;
    gh += gh5;
    time_embed_.backward(time1_.backward(time_act_.backward(time2_.backward(gh))));
    return gh;
}

DenoiseOutput Denoiser::infer(const Tensor& z_t, const std::vector<double>& t, const Tensor& cond,
                              bool want_taps) const {
    check_inputs(z_t, t, cond);
    Tensor h = time2_.infer(time_act_.infer(time1_.infer(time_embed_.infer(Tensor({t.size()}, t)))));
    h += cond;

    Tensor d1 = down1_.infer(in_conv_.infer(z_t), h);
    Tensor d2 = down2_.infer(downsample1_.infer(d1), h);
    Tensor mid = mid_.infer(downsample2_.infer(d2), h);
    Tensor u1 = up1_.infer(nn::concat_channels(upsample1_.infer(mid), d2), h);
    Tensor u2 = up2_.infer(nn::concat_channels(upsample2_.infer(u1), d1), h);

    DenoiseOutput out;
    out.eps = out_conv_.infer(u2);
    if (want_taps) {
        const auto& names = tap_names();
        out.taps = {{names[0], std::move(d1)}, {names[1], std::move(d2)}, {names[2], std::move(mid)},
                    {names[3], std::move(u1)}, {names[4], std::move(u2)}};
    }
    return out;
}

std::vector<nn::Param*> Denoiser::params() {
    std::vector<nn::Param*> out;
    append(out, time1_.params());
    append(out, time2_.params());
    append(out, in_conv_.params());
    append(out, down1_.params());
    append(out, downsample1_.params());
    append(out, down2_.params());
    append(out, downsample2_.params());
    append(out, mid_.params());
    append(out, up1_.params());
    append(out, up2_.params());
    append(out, out_conv_.params());
    return out;
}

std::vector<const nn::Param*> Denoiser::params() const {
    auto ps = const_cast<Denoiser*>(this)->params();
    return {ps.begin(), ps.end()};
}

}  // namespace latsketch::backbone
