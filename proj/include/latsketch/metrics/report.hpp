// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/metrics/judge.hpp"
#include "latsketch/pipeline/pipeline.hpp"

namespace latsketch::metrics {

/// PSNR values are capped here before averaging so aggregates stay finite.
inline constexpr double kPsnrCap = 100.0;

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

struct EvalOptions {
    double k_ratio = pipeline::kDefaultKRatio;
    std::uint64_t seed = 0;  // item i samples with seed + id(i)
    pipeline::StepMode step_mode = pipeline::StepMode::aligned;
    double jitter = 0.0;      // jitter_sketch strength applied to the edge maps
    bool use_styles = true;   // condition the reverse chain on each item's style
    bool direct = false;      // also score direct decodes
};

struct ClassAcc {
    std::string name;
    double acc = 0.0;
    std::size_t n = 0;
};

/// Generated images are compared against the item's real image (PSNR,
/// SSIM), its sketch (silhouette IoU) and its class (judge). Confidence is
/// the judge probability of the requested class. Accuracy fields are only
/// filled when the judge passed the real-image gate.
struct EvalReport {
    double k_ratio = 0.0;
    std::size_t k = 0;
    double jitter = 0.0;
    std::string step_mode;
    Aggregate psnr, ssim, iou, confidence;
    std::optional<double> acc;
    std::vector<ClassAcc> per_class;
    std::optional<Aggregate> direct_confidence;
    std::optional<double> direct_acc;
    double judge_heldout_acc = 0.0;
    bool judge_valid = false;

    nlohmann::ordered_json to_json() const;
};

EvalReport evaluate(const pipeline::Translator& translator, const Judge& judge,
                    const std::vector<const datagen::DataItem*>& items, const EvalOptions& options);

struct SweepRow {
    double k_ratio = 0.0;
    std::size_t k = 0;
    Aggregate iou, confidence, ssim;
    std::optional<double> acc;
};

/// One evaluate() per ratio with the same seed ladder. Throws UsageError on
/// an empty item list or ratio list.
std::vector<SweepRow> sweep_k(const pipeline::Translator& translator, const Judge& judge,
                              const std::vector<const datagen::DataItem*>& items, const std::vector<double>& ratios,
                              const EvalOptions& options);

/// `points` evenly spaced values from `from` to `to` inclusive (points >= 2),
/// or {from} when points == 1.
std::vector<double> linspace(double from, double to, std::size_t points);

nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows);
nlohmann::ordered_json to_json(const Aggregate& a);

}  // namespace latsketch::metrics
