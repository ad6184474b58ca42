// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "latsketch/diffusion/schedule.hpp"
#include "latsketch/error.hpp"

namespace latsketch::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::string to_string(StepMode mode) { return mode == StepMode::aligned ? "aligned" : "paper-literal"; }

StepMode step_mode_from_string(const std::string& s) {
    if (s == "aligned") return StepMode::aligned;
    if (s == "paper-literal") return StepMode::paper_literal;
    throw UsageError("unknown step mode '" + s + "' (expected aligned or paper-literal)");
}

std::size_t k_from_ratio(double ratio, std::size_t steps) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("k_ratio must lie in (0, 1)");
    if (steps < 2) throw UsageError("k_from_ratio needs T >= 2");
    const double k = std::round(ratio * static_cast<double>(steps));
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, steps - 1);
}

std::string tensor_digest(const Tensor& t) {
    std::vector<std::uint8_t> bytes(t.size() * sizeof(double));
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t bits;
        const double v = t[i];
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return io::digest_hex(io::fnv1a64(bytes));
}

Translator::Translator(const backbone::BackboneBundle& bundle, const lctn::LctnModel& lctn)
    : bundle_(bundle), lctn_(lctn) {
    if (!bundle.frozen()) throw ModelError("translation requires a frozen backbone");
    if (lctn.backbone_digest != bundle.content_digest())
        throw ModelError("LCTN was trained against backbone " + lctn.backbone_digest + " but the loaded backbone is " +
                         bundle.content_digest());
}

Tensor Translator::latent_z0(const Tensor& sketch, std::size_t class_id, StageTimings* timings) const {
    const std::size_t s = bundle_.image_size();
    const bool ok = (sketch.rank() == 2 && sketch.dim(0) == s && sketch.dim(1) == s) ||
                    (sketch.rank() == 3 && sketch.dim(0) == 1 && sketch.dim(1) == s && sketch.dim(2) == s);
    if (!ok) throw ShapeError("sketch must be " + std::to_string(s) + "x" + std::to_string(s) + ", got " +
                              nn::shape_str(sketch.shape()));
    auto t0 = Clock::now();
    const Tensor latent = bundle_.encode_image(lctn::sketch_image(sketch));
    if (timings) timings->encode = ms_since(t0);
    t0 = Clock::now();
    const Tensor f = lctn::extract_features_one(bundle_, latent, bundle_.embed_condition(class_id, std::nullopt));
    if (timings) timings->features = ms_since(t0);
    t0 = Clock::now();
    Tensor z0 = lctn_.infer(f);
    if (timings) timings->lctn = ms_since(t0);
    return z0;
}

Tensor Translator::latent_z0(const Tensor& sketch, std::size_t class_id) const {
    return latent_z0(sketch, class_id, nullptr);
}

Tensor Translator::direct_decode(const Tensor& sketch, std::size_t class_id) const {
    return bundle_.decode_latent(latent_z0(sketch, class_id));
}

TranslationResult Translator::translate(const Tensor& sketch, const SampleConfig& cfg) const {
    const auto& sched = bundle_.schedule();
    const std::size_t T = sched.steps();
    const std::size_t k = k_from_ratio(cfg.k_ratio, T);
    // Validates ids before any work is done.
    const Tensor cond = bundle_.embed_condition(cfg.class_id, cfg.style_id);

    TranslationResult res;
    res.k_used = k;
    const Tensor z0 = latent_z0(sketch, cfg.class_id, &res.timings);
    res.z0_digest = tensor_digest(z0);

    nn::Rng noise = nn::Rng(cfg.seed).substream("noise");
    auto t0 = Clock::now();
    Tensor z = diffusion::q_sample(z0, k, nn::randn(z0.shape(), noise), sched);
    res.timings.perturb = ms_since(t0);
    res.zk_digest = tensor_digest(z);

    t0 = Clock::now();
    const std::size_t start = cfg.step_mode == StepMode::aligned ? k : T;
    for (std::size_t t = start; t >= 1; --t) {
        const Tensor eps_hat = bundle_.denoise_eps(z, t, cond, false).eps;
        if (t > 1) {
            const Tensor draw = nn::randn(z.shape(), noise);
            z = diffusion::p_step(z, t, eps_hat, &draw, sched);
        } else {
            z = diffusion::p_step(z, t, eps_hat, nullptr, sched);
        }
    }
    res.timings.denoise = ms_since(t0);

    t0 = Clock::now();
    res.image = bundle_.decode_latent(z);
    if (cfg.return_direct_decode) res.direct = bundle_.decode_latent(z0);
    res.timings.decode = ms_since(t0);
    return res;
}

TranslationResult Translator::translate_styled(const Tensor& sketch, std::size_t class_id, std::size_t style_id,
                                               SampleConfig cfg) const {
    cfg.class_id = class_id;
    cfg.style_id = style_id;
    return translate(sketch, cfg);
}

}  // namespace latsketch::pipeline
