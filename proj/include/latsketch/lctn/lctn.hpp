// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latsketch/backbone/bundle.hpp"
#include "latsketch/datagen/dataset.hpp"
#include "latsketch/nn/sequential.hpp"

namespace latsketch::lctn {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

/// Sketch mask [1,S,S] or [S,S] (1 = stroke) to the RGB image the encoder
/// sees: black strokes on white, replicated to three channels.
Tensor sketch_image(const Tensor& sketch);

/// Feature stack for a batch: one denoiser pass at t = 0 over sketch
/// latents [N,4,s,s] with per-item conditioning [N,d]; every tap is resized
/// bilinearly to s x s and the taps are concatenated in tap-name order.
/// Output [N, D_f, s, s]. Requires a frozen bundle.
Tensor extract_features(const backbone::BackboneBundle& bundle, const Tensor& sketch_latents, const Tensor& conds);

/// Single-item form: latent [4,s,s], cond [d] -> [D_f, s, s].
Tensor extract_features_one(const backbone::BackboneBundle& bundle, const Tensor& sketch_latent, const Tensor& cond);

inline const std::vector<std::size_t>& hidden_widths() {
    static const std::vector<std::size_t> widths = {512, 256, 128, 64};
    return widths;
}

/// Per-position MLP from feature vectors to latent vectors:
/// D_f -> 512 -> 256 -> 128 -> 64 -> C, each hidden layer Linear, ReLU,
/// BatchNorm; the output layer is linear. Train-mode batch statistics pool
/// every spatial position of every item in the batch.
class LctnModel {
public:
    LctnModel(std::size_t feature_dim, std::size_t out_channels, nn::Rng& rng, double init_std = 0.02);

    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t out_channels() const noexcept { return out_channels_; }

    /// [N, D_f, h, w] -> [N, C, h, w]. Train mode caches for backward.
    Tensor forward(const Tensor& features, Mode mode);
    /// Eval path; also accepts a single [D_f, h, w] stack.
    Tensor infer(const Tensor& features) const;
    /// Returns the grad wrt the features; accumulates parameter grads.
    Tensor backward(const Tensor& grad_out);

    std::vector<nn::Param*> params() { return net_.params(); }
    std::vector<const nn::Param*> params() const { return net_.params(); }
    nn::Sequential& net() noexcept { return net_; }
    const nn::Sequential& net() const noexcept { return net_; }

    /// Digest of the backbone this model was trained against.
    std::string backbone_digest;

    io::Checkpoint to_checkpoint() const;
    /// Throws ModelError on a kind, shape or backbone-digest mismatch.
    static std::unique_ptr<LctnModel> from_checkpoint(const io::Checkpoint& ckpt,
                                                      const backbone::BackboneBundle& bundle);
    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<LctnModel> load(const std::filesystem::path& path, const backbone::BackboneBundle& bundle);

private:
    std::size_t feature_dim_, out_channels_;
    nn::Sequential net_;
    std::vector<nn::BatchNorm*> norms_;
    Shape in_shape_;
};

inline constexpr const char* kLctnKind = "lctn";

/// Precomputed training pairs: features from the edge map with class-only
/// conditioning, targets are the encoder latents of the matching images.
struct PairSet {
    Tensor features;  // [N, D_f, s, s]
    Tensor targets;   // [N, C, s, s]
    std::vector<std::size_t> class_ids;
};

PairSet build_pairs(const backbone::BackboneBundle& bundle, const std::vector<const datagen::DataItem*>& items);

struct LctnTrainConfig {
    std::size_t iters = 20000;
    std::size_t batch = 4;
    double lr = 1e-3;
    std::size_t warmup = 100;
    double init_std = 0.02;
    std::size_t log_every = 1000;
};

struct LctnTrainReport {
    std::vector<double> losses;   // per iteration
    std::vector<double> lrs;      // effective learning rate per iteration
    double heldout_mse = 0.0;
    double baseline_mse = 0.0;    // dataset-mean latent predictor on the same held-out set
    std::string digest_before;
    std::string digest_after;
    std::size_t digest_checks = 0;
};

using ProgressFn = std::function<void(std::size_t iter, double loss)>;

/// Trains on the train split. The bundle must be frozen; its digest is
/// re-verified once per epoch and at the end (ModelError on any change).
std::unique_ptr<LctnModel> train_lctn(const backbone::BackboneBundle& bundle, const datagen::Dataset& data,
                                      const LctnTrainConfig& cfg, nn::Rng rng, LctnTrainReport* report = nullptr,
                                      const ProgressFn& progress = {});

/// Mean squared error of the model's eval-mode latents against the targets.
double latent_mse(const LctnModel& model, const PairSet& pairs);

/// MSE of always predicting the per-element mean of `train_targets`.
double constant_baseline_mse(const Tensor& train_targets, const Tensor& eval_targets);

}  // namespace latsketch::lctn
