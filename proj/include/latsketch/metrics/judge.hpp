// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/io/checkpoint.hpp"
#include "latsketch/nn/sequential.hpp"

namespace latsketch::metrics {

using nn::Tensor;

/// Held-out real-image accuracy a judge must reach before its verdicts on
/// generated images are reported.
inline constexpr double kJudgeGate = 0.95;

/// Small image classifier used to score generated images:
/// three stride-2 conv + ReLU stages, then a two-layer MLP head over the
/// flattened 4x4 map. Trained with softmax cross-entropy.
class Judge {
public:
    Judge(std::vector<std::string> class_names, std::size_t image_size, nn::Rng& rng);

    std::size_t n_classes() const noexcept { return class_names_.size(); }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    std::size_t image_size() const noexcept { return image_size_; }

    /// [N,3,S,S] -> [N, n_classes] logits (eval path).
    Tensor logits(const Tensor& images) const;
    /// Row-wise softmax of logits; a single [3,S,S] image gives [1, n_classes].
    Tensor probabilities(const Tensor& images) const;
    std::vector<std::size_t> predict(const Tensor& images) const;

    /// Train step: returns mean cross-entropy and accumulates grads.
    double train_step(const Tensor& images, const std::vector<std::size_t>& labels);
    std::vector<nn::Param*> params();

    double heldout_acc = 0.0;

    io::Checkpoint to_checkpoint() const;
    static std::unique_ptr<Judge> from_checkpoint(const io::Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<Judge> load(const std::filesystem::path& path);

private:
    Tensor batched(const Tensor& images) const;

    std::vector<std::string> class_names_;
    std::size_t image_size_;
    nn::Sequential features_;
    nn::Sequential head_;
};

inline constexpr const char* kJudgeKind = "judge";

struct JudgeTrainConfig {
    std::size_t steps = 1500;
    std::size_t batch = 32;
    double lr = 1e-3;
    double noise_std = 0.03;  // additive Gaussian pixel noise on training batches
    std::size_t log_every = 250;
};

struct JudgeReport {
    std::vector<double> losses;
    double heldout_acc = 0.0;
};

/// Trains on the train split, measures test-split accuracy into `heldout_acc`.
std::unique_ptr<Judge> train_judge(const datagen::Dataset& data, const JudgeTrainConfig& cfg, nn::Rng rng,
                                   JudgeReport* report = nullptr,
                                   const std::function<void(std::size_t, double)>& progress = {});

/// Fraction of images whose argmax class equals the label.
double classify_acc(const Judge& judge, const Tensor& images, const std::vector<std::size_t>& labels);

}  // namespace latsketch::metrics
