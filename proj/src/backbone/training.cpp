// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/backbone/training.hpp"

#include <algorithm>
#include <cmath>

#include "latsketch/error.hpp"
#include "latsketch/nn/adam.hpp"

namespace latsketch::backbone {

namespace {

using datagen::DataItem;
using datagen::Split;
using OptIds = std::vector<std::optional<std::size_t>>;

constexpr std::size_t kChunk = 128;

template <class Fn>
Tensor map_chunks(const Tensor& x, Fn fn) {
    std::vector<Tensor> parts;
    for (std::size_t b = 0; b < x.dim(0); b += kChunk) parts.push_back(fn(x.slice(b, std::min(kChunk, x.dim(0) - b))));
    if (parts.size() == 1) return parts.front();
    Shape s = parts.front().shape();
    s[0] = x.dim(0);
    Tensor out(s);
    std::size_t at = 0;
    for (const Tensor& p : parts) {
        std::copy(p.raw(), p.raw() + p.size(), out.raw() + at);
        at += p.size();
    }
    return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    Shape s = x.shape();
    const std::size_t stride = x.size() / s[0];
    s[0] = rows.size();
    Tensor out(s);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.raw() + rows[i] * stride, x.raw() + (rows[i] + 1) * stride, out.raw() + i * stride);
    return out;
}

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch, nn::Rng& rng) {
    std::vector<std::size_t> rows(batch);
    for (auto& r : rows) r = rng.below(n);
    return rows;
}

void require_finite_loss(double loss, std::size_t step, const char* what) {
    if (!std::isfinite(loss))
        throw NumericError(std::string(what) + " diverged at step " + std::to_string(step) + " (loss " +
                           std::to_string(loss) + ")");
}

void report_progress(const ProgressFn& progress, std::size_t log_every, const std::vector<double>& losses) {
    const std::size_t s = losses.size();
    if (!progress || log_every == 0 || s % log_every != 0) return;
    double sum = 0.0;
    for (std::size_t i = s - log_every; i < s; ++i) sum += losses[i];
    progress(s, sum / static_cast<double>(log_every));
}

/// Per-item noise-regression inputs: z_t = sqrt(abar) z0 + sqrt(1 - abar) eps.
void noisy_batch(const Tensor& z0, const std::vector<std::size_t>& ts, const diffusion::NoiseSchedule& sched,
                 nn::Rng& rng, Tensor& z_t, Tensor& eps) {
    eps = nn::randn(z0.shape(), rng);
    z_t = Tensor(z0.shape());
    const std::size_t per = z0.size() / z0.dim(0);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double ab = sched.alpha_bar(ts[i]);
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        for (std::size_t k = i * per; k < (i + 1) * per; ++k) z_t[k] = a * z0[k] + b * eps[k];
    }
}

double correlation(const double* a, const double* b, std::size_t n) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

struct LatentSet {
    Tensor z;  // [N,4,s,s], scaled
    OptIds classes, styles;
};

LatentSet encode_split(const BackboneBundle& bundle, const datagen::Dataset& data, Split split) {
    const auto items = data.select(split);
    if (items.empty()) throw DataError("dataset has no " + to_string(split) + " items");
    LatentSet set;
    set.z = map_chunks(stack_images(items), [&](const Tensor& x) { return bundle.encode_image(x); });
    for (const DataItem* it : items) {
        set.classes.emplace_back(it->class_id);
        set.styles.emplace_back(it->style_id);
    }
    return set;
}

}  // namespace

Tensor stack_images(const std::vector<const DataItem*>& items) {
    std::vector<Tensor> imgs;
    imgs.reserve(items.size());
    for (const DataItem* it : items) imgs.push_back(it->image);
    return nn::stack(imgs);
}

AutoencoderReport train_autoencoder(BackboneBundle& bundle, const datagen::Dataset& data,
                                    const AutoencoderTrainConfig& cfg, nn::Rng rng, const ProgressFn& progress) {
    Autoencoder& ae = bundle.autoencoder();
    if (cfg.batch == 0) throw UsageError("autoencoder batch must be positive");
    const auto train_items = data.select(Split::train);
    const auto test_items = data.select(Split::test);
    if (train_items.empty()) throw DataError("dataset has no training items");
    const Tensor train = stack_images(train_items);

    nn::Adam opt(ae.params(), {.lr = cfg.lr});
    nn::Rng batches = rng.substream("batches");
    AutoencoderReport rep;
    rep.losses.reserve(cfg.steps);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const Tensor x = gather_rows(train, draw_batch(train.dim(0), cfg.batch, batches));
        const Tensor z = ae.encode_raw(x, Mode::train);
        const Tensor y = ae.decode_raw(z, Mode::train);
        const double n_pix = static_cast<double>(y.size()), n_lat = static_cast<double>(z.size());
        Tensor gy = y - x;
        const double loss = gy.sum_squares() / n_pix + cfg.latent_l2 * z.sum_squares() / n_lat;
        require_finite_loss(loss, step, "autoencoder training");
        gy *= 2.0 / n_pix;
        Tensor gz = ae.backward_decoder(gy);
        const double lat = 2.0 * cfg.latent_l2 / n_lat;
        for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += lat * z[i];
        ae.backward_encoder(gz);
        opt.step();
        rep.losses.push_back(loss);
        report_progress(progress, cfg.log_every, rep.losses);
    }

    // Per-channel scale so training latents have unit standard deviation.
    std::fill(ae.latent_scale.begin(), ae.latent_scale.end(), 1.0);
    const Tensor raw = map_chunks(train, [&](const Tensor& x) { return ae.encode(x); });
    const std::size_t c = raw.dim(1), hw = raw.dim(2) * raw.dim(3), n = raw.dim(0);
    for (std::size_t k = 0; k < c; ++k) {
        double sum = 0, sq = 0;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
                const double v = raw[(b * c + k) * hw + i];
                sum += v;
                sq += v * v;
            }
        const double cnt = static_cast<double>(n * hw), mean = sum / cnt;
        const double sd = std::sqrt(std::max(sq / cnt - mean * mean, 0.0));
        if (!(sd > 1e-8)) throw NumericError("latent channel " + std::to_string(k) + " collapsed to a constant");
        ae.latent_scale[k] = 1.0 / sd;
        rep.scaled_latent_std.push_back(sd * ae.latent_scale[k]);
    }
    rep.latent_scale = ae.latent_scale;

    const Tensor held = test_items.empty() ? train : stack_images(test_items);
    const Tensor recon = map_chunks(held, [&](const Tensor& x) { return ae.decode(ae.encode(x)); });
    rep.heldout_mse = nn::mean_squared_error(recon, held);
    rep.heldout_psnr = rep.heldout_mse > 0 ? 10.0 * std::log10(1.0 / rep.heldout_mse) : 100.0;

    // Sensitivity probe: max-abs output change for a 1e-6 latent nudge.
    nn::Rng probe_rng = rng.substream("probe");
    const Tensor z_probe = ae.encode(held.slice(0, std::min<std::size_t>(16, held.dim(0))));
    Tensor nudged = z_probe;
    for (double& v : nudged.data()) v += probe_rng.uniform() < 0.5 ? -1e-6 : 1e-6;
    rep.decode_probe = (ae.decode_unclamped(nudged) - ae.decode_unclamped(z_probe)).max_abs();

    bundle.mark_autoencoder_trained(rep.heldout_psnr, rep.decode_probe);
    return rep;
}

double denoiser_heldout_loss(const BackboneBundle& bundle, const datagen::Dataset& data, nn::Rng rng) {
    const LatentSet set = encode_split(bundle, data, Split::test);
    const auto& sched = bundle.schedule();
    std::vector<std::size_t> ts(set.z.dim(0));
    for (auto& t : ts) t = 1 + rng.below(sched.steps());
    Tensor z_t, eps;
    noisy_batch(set.z, ts, sched, rng, z_t, eps);
    const Tensor cond = bundle.cond_table().gather(set.classes, set.styles);
    const std::vector<double> tv(ts.begin(), ts.end());
    double loss = 0.0;
    for (std::size_t b = 0; b < z_t.dim(0); b += kChunk) {
        const std::size_t m = std::min(kChunk, z_t.dim(0) - b);
        const std::vector<double> tc(tv.begin() + static_cast<std::ptrdiff_t>(b),
                                     tv.begin() + static_cast<std::ptrdiff_t>(b + m));
        const Tensor out = bundle.denoiser().infer(z_t.slice(b, m), tc, cond.slice(b, m), false).eps;
        loss += (out - eps.slice(b, m)).sum_squares();
    }
    return loss / static_cast<double>(eps.size());
}

DenoiserReport train_denoiser(BackboneBundle& bundle, const datagen::Dataset& data, const DenoiserTrainConfig& cfg,
                              nn::Rng rng, const ProgressFn& progress) {
    if (!bundle.autoencoder_trained()) throw ModelError("train the autoencoder before the denoiser");
    if (cfg.batch == 0) throw UsageError("denoiser batch must be positive");
    Denoiser& dn = bundle.denoiser();
    CondTable& cond = bundle.cond_table();
    const auto& sched = bundle.schedule();
    const LatentSet train = encode_split(bundle, data, Split::train);

    DenoiserReport rep;
    const bool has_test = !data.select(Split::test).empty();
    if (has_test) rep.heldout_loss_before = denoiser_heldout_loss(bundle, data, rng.substream("heldout"));

    std::vector<nn::Param*> params = dn.params();
    params.push_back(&cond.classes);
    params.push_back(&cond.styles);
    nn::Adam opt(params, {.lr = cfg.lr});
    nn::Rng batches = rng.substream("batches");
    nn::Rng noise = rng.substream("noise");
    rep.losses.reserve(cfg.steps);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const auto rows = draw_batch(train.z.dim(0), cfg.batch, batches);
        std::vector<std::size_t> ts(rows.size());
        OptIds cls(rows.size()), sty(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ts[i] = 1 + batches.below(sched.steps());
            if (batches.uniform() >= cfg.class_dropout) cls[i] = train.classes[rows[i]];
            if (batches.uniform() >= cfg.style_dropout) sty[i] = train.styles[rows[i]];
        }
        Tensor z_t, eps;
        noisy_batch(gather_rows(train.z, rows), ts, sched, noise, z_t, eps);
        const Tensor c = cond.gather(cls, sty);
        const Tensor eps_hat = dn.forward(z_t, std::vector<double>(ts.begin(), ts.end()), c);
        Tensor g = eps_hat - eps;
        const double loss = g.sum_squares() / static_cast<double>(g.size());
        require_finite_loss(loss, step, "denoiser training");
        g *= 2.0 / static_cast<double>(g.size());
        cond.scatter_grad(cls, sty, dn.backward(g));
        opt.step();
        rep.losses.push_back(loss);
        report_progress(progress, cfg.log_every, rep.losses);
    }
    bundle.mark_denoiser_trained();

    if (has_test) {
        rep.heldout_loss_after = denoiser_heldout_loss(bundle, data, rng.substream("heldout"));
        const LatentSet test = encode_split(bundle, data, Split::test);
        nn::Rng corr_rng = rng.substream("correlation");
        const std::size_t t_mid = std::max<std::size_t>(1, sched.steps() / 2);
        double total = 0.0;
        const std::size_t n = test.z.dim(0), per = test.z.size() / n;
        for (std::size_t b = 0; b < n; b += kChunk) {
            const std::size_t m = std::min(kChunk, n - b);
            Tensor z_t, eps;
            noisy_batch(test.z.slice(b, m), std::vector<std::size_t>(m, t_mid), sched, corr_rng, z_t, eps);
            const OptIds cls(test.classes.begin() + static_cast<std::ptrdiff_t>(b),
                             test.classes.begin() + static_cast<std::ptrdiff_t>(b + m));
            const OptIds sty(test.styles.begin() + static_cast<std::ptrdiff_t>(b),
                             test.styles.begin() + static_cast<std::ptrdiff_t>(b + m));
            const Tensor out = bundle.denoiser().infer(z_t, std::vector<double>(m, static_cast<double>(t_mid)),
                                                       bundle.cond_table().gather(cls, sty), false).eps;
            for (std::size_t i = 0; i < m; ++i) total += correlation(out.raw() + i * per, eps.raw() + i * per, per);
        }
        rep.mid_t_correlation = total / static_cast<double>(n);
    }
    return rep;
}

}  // namespace latsketch::backbone
