// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latsketch/backbone/autoencoder.hpp"
#include "latsketch/backbone/denoiser.hpp"
#include "latsketch/diffusion/schedule.hpp"
#include "latsketch/io/checkpoint.hpp"

namespace latsketch::backbone {

/// Learned conditioning vectors: class row plus optional style row.
/// A missing class (conditioning dropout) contributes the zero vector.
class CondTable {
public:
    CondTable(std::size_t n_classes, std::size_t n_styles, std::size_t dim, nn::Rng& rng);

    std::size_t n_classes() const { return classes.value.dim(0); }
    std::size_t n_styles() const { return styles.value.dim(0); }
    std::size_t dim() const { return classes.value.dim(1); }

    /// [dim]. Throws UsageError for out-of-range ids.
    Tensor embed(std::size_t class_id, std::optional<std::size_t> style_id) const;

    /// [N, dim] rows for a batch of (optional class, optional style) pairs.
    Tensor gather(const std::vector<std::optional<std::size_t>>& class_ids,
                  const std::vector<std::optional<std::size_t>>& style_ids) const;
    /// Adds the rows of `grad` ([N, dim]) into the rows that `gather` read.
    void scatter_grad(const std::vector<std::optional<std::size_t>>& class_ids,
                      const std::vector<std::optional<std::size_t>>& style_ids, const Tensor& grad);

    nn::Param classes;  // [n_classes, dim]
    nn::Param styles;   // [n_styles, dim]
};

struct BackboneConfig {
    AutoencoderConfig autoencoder;
    DenoiserConfig denoiser;
    diffusion::ScheduleSpec schedule;
    std::vector<std::string> class_names;
    std::vector<std::string> style_names;
};

/// Autoencoder + conditional denoiser + conditioning table + schedule.
///
/// Lifecycle: constructed untrained, trained through the mutable accessors,
/// then `freeze()` rounds every parameter to float32 and records the content
/// digest. A frozen bundle refuses mutable access; the digest is the
/// FNV-1a 64 hash of the float32 checkpoint payload, so an in-memory frozen
/// bundle and one loaded from disk hash identically.
class BackboneBundle {
public:
    BackboneBundle(BackboneConfig config, std::uint64_t seed);

    const BackboneConfig& config() const noexcept { return config_; }
    const diffusion::NoiseSchedule& schedule() const noexcept { return schedule_; }
    std::size_t latent_channels() const { return config_.autoencoder.latent_channels; }
    std::size_t latent_size() const { return config_.autoencoder.image_size / 4; }
    std::size_t image_size() const { return config_.autoencoder.image_size; }

    Autoencoder& autoencoder();
    const Autoencoder& autoencoder() const noexcept { return autoencoder_; }
    Denoiser& denoiser();
    const Denoiser& denoiser() const noexcept { return denoiser_; }
    CondTable& cond_table();
    const CondTable& cond_table() const noexcept { return cond_; }

    void mark_autoencoder_trained(double recon_psnr, double decode_probe);
    void mark_denoiser_trained();
    bool autoencoder_trained() const noexcept { return ae_trained_; }
    bool denoiser_trained() const noexcept { return dn_trained_; }
    /// Held-out reconstruction PSNR measured at training time.
    double recon_psnr() const noexcept { return recon_psnr_; }
    /// Max-abs output change for a 1e-6 latent perturbation, measured at training time.
    double decode_probe() const noexcept { return decode_probe_; }

    /// Image [3,S,S] or [N,3,S,S] in [0,1] -> scaled latent [4,s,s] or [N,4,s,s].
    Tensor encode_image(const Tensor& image) const;
    /// Latent [4,s,s] or [N,4,s,s] -> image clamped to [0,1].
    Tensor decode_latent(const Tensor& z) const;
    /// [cond_dim]: class row plus style row when given.
    Tensor embed_condition(std::size_t class_id, std::optional<std::size_t> style_id) const;
    /// Single-latent denoiser pass; t in [0, T], t = 0 only for feature extraction.
    DenoiseOutput denoise_eps(const Tensor& z_t, std::size_t t, const Tensor& cond, bool want_taps) const;

    std::vector<std::size_t> tap_channels() const { return denoiser_.tap_channels(); }

    /// Throws ModelError unless both stages are trained.
    void freeze();
    bool frozen() const noexcept { return frozen_; }
    /// Digest recorded by freeze(); empty before.
    const std::string& content_digest() const noexcept { return digest_; }
    /// Hash of the current parameters.
    std::string compute_digest() const;
    /// Throws ModelError if the parameters no longer hash to the recorded digest.
    void verify_digest() const;

    /// Requires a frozen bundle.
    io::Checkpoint to_checkpoint() const;
    /// Rebuilds and freezes; throws ModelError on a kind or digest mismatch.
    static std::unique_ptr<BackboneBundle> from_checkpoint(const io::Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<BackboneBundle> load(const std::filesystem::path& path);

private:
    BackboneBundle(BackboneConfig config, nn::Rng init);
    std::vector<io::NamedTensor> named_tensors() const;
    std::vector<nn::Param*> all_params();
    void require_mutable(const char* what) const;

    BackboneConfig config_;
    diffusion::NoiseSchedule schedule_;
    Autoencoder autoencoder_;
    Denoiser denoiser_;
    CondTable cond_;
    bool ae_trained_ = false;
    bool dn_trained_ = false;
    bool frozen_ = false;
    double recon_psnr_ = 0.0;
    double decode_probe_ = 0.0;
    std::string digest_;
};

inline constexpr const char* kBackboneKind = "backbone";

}  // namespace latsketch::backbone
