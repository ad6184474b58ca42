// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "latsketch/backbone/bundle.hpp"
#include "latsketch/lctn/lctn.hpp"

namespace latsketch::pipeline {

using nn::Tensor;

/// How the reverse chain is indexed after perturbing to level k.
/// `aligned` runs t = k .. 1 (k steps, matching the noise level);
/// `paper_literal` runs a full t = T .. 1 pass starting from z_k.
enum class StepMode { aligned, paper_literal };

std::string to_string(StepMode mode);
/// Accepts "aligned" and "paper-literal"; throws UsageError otherwise.
StepMode step_mode_from_string(const std::string& s);

inline constexpr double kDefaultKRatio = 0.8;

struct SampleConfig {
    double k_ratio = kDefaultKRatio;
    std::uint64_t seed = 0;
    std::size_t class_id = 0;
    std::optional<std::size_t> style_id;
    StepMode step_mode = StepMode::aligned;
    bool return_direct_decode = false;
};

/// k = round(ratio * T) clamped to [1, T - 1]. Throws UsageError unless 0 < ratio < 1.
std::size_t k_from_ratio(double ratio, std::size_t steps);

struct StageTimings {
    double encode = 0, features = 0, lctn = 0, perturb = 0, denoise = 0, decode = 0;  // milliseconds
};

struct TranslationResult {
    Tensor image;                 // [3, S, S] in [0, 1]
    std::optional<Tensor> direct; // decode(z0) when requested
    std::string z0_digest;
    std::string zk_digest;
    std::size_t k_used = 0;
    StageTimings timings;
};

/// Hash of a tensor's float64 bytes, as 16 hex digits.
std::string tensor_digest(const Tensor& t);

/// Sketch-to-image translation over a frozen backbone and a matching LCTN.
///
/// Stages: encode the sketch image, extract features with class-only
/// conditioning, map them to z0 with the LCTN, perturb z0 to level k, run the
/// reverse chain with class (+ style) conditioning, decode. Only the perturb
/// and reverse stages consume randomness, drawn from Rng(seed) substream
/// "noise": first the perturbation noise, then one draw per reverse step in
/// descending t (none at t = 1). Both models are only read.
class Translator {
public:
    /// Throws ModelError if the LCTN was trained against a different backbone.
    Translator(const backbone::BackboneBundle& bundle, const lctn::LctnModel& lctn);

    const backbone::BackboneBundle& bundle() const noexcept { return bundle_; }

    TranslationResult translate(const Tensor& sketch, const SampleConfig& cfg) const;
    /// translate with the style applied during the reverse chain only.
    TranslationResult translate_styled(const Tensor& sketch, std::size_t class_id, std::size_t style_id,
                                       SampleConfig cfg) const;

    /// LCTN latent for a sketch; independent of k and seed.
    Tensor latent_z0(const Tensor& sketch, std::size_t class_id) const;
    /// decode(z0) with no diffusion; consumes no randomness.
    Tensor direct_decode(const Tensor& sketch, std::size_t class_id) const;

private:
    Tensor latent_z0(const Tensor& sketch, std::size_t class_id, StageTimings* timings) const;

    const backbone::BackboneBundle& bundle_;
    const lctn::LctnModel& lctn_;
};

}  // namespace latsketch::pipeline
