// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "latsketch/nn/tensor.hpp"

namespace latsketch::metrics {

using nn::Tensor;

/// Returned by psnr for identical inputs.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(max^2 / MSE); kInfinitePsnr when MSE is 0. Throws ShapeError on mismatch.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

/// Luminance of a [3,H,W] image (0.299, 0.587, 0.114) or a [1,H,W] / [H,W] plane, as [H,W].
Tensor luminance(const Tensor& image);

struct SsimParams {
    std::size_t window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
    double max_val = 1.0;
};

/// Mean SSIM over every window x window position of the luminance planes
/// (uniform weights, population statistics). Throws UsageError if the
/// image is smaller than the window.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});

/// Binary mask (> 0.5) grown by one pixel in the 4-neighbourhood.
Tensor dilate(const Tensor& mask);

/// |a and b| / |a or b| over binary masks (> 0.5). Both empty gives 0.
double mask_iou(const Tensor& a, const Tensor& b);

/// IoU between the dilated edge map of a generated RGB image and a sketch
/// mask. Throws UsageError if the sketch has no stroke pixels.
double silhouette_iou(const Tensor& generated, const Tensor& sketch);

}  // namespace latsketch::metrics
