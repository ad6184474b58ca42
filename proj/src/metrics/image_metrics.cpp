// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/metrics/image_metrics.hpp"

#include <cmath>
#include <vector>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"

namespace latsketch::metrics {

double psnr(const Tensor& a, const Tensor& b, double max_val) {
    const double mse = nn::mean_squared_error(a, b);
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(max_val * max_val / mse);
}

Tensor luminance(const Tensor& image) {
    if (image.rank() == 2) return image;
    if (image.rank() == 3 && image.dim(0) == 1) return image.reshaped({image.dim(1), image.dim(2)});
    if (image.rank() != 3 || image.dim(0) != 3)
        throw ShapeError("luminance needs [3,H,W], [1,H,W] or [H,W], got " + nn::shape_str(image.shape()));
    const std::size_t h = image.dim(1), w = image.dim(2), hw = h * w;
    Tensor y({h, w});
    for (std::size_t i = 0; i < hw; ++i) y[i] = 0.299 * image[i] + 0.587 * image[hw + i] + 0.114 * image[2 * hw + i];
    return y;
}

double ssim(const Tensor& a, const Tensor& b, const SsimParams& p) {
    nn::require_same_shape(a, b, "ssim");
    const Tensor x = luminance(a), y = luminance(b);
    const std::size_t h = x.dim(0), w = x.dim(1), win = p.window;
    if (win == 0 || h < win || w < win)
        throw UsageError("ssim: image " + nn::shape_str(x.shape()) + " is smaller than the window");

    // Summed-area tables of x, y, x^2, y^2, xy with a zero first row/column.
    const std::size_t W = w + 1;
    std::vector<double> sx((h + 1) * W), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double xv = x[i * w + j], yv = y[i * w + j];
            const std::size_t o = (i + 1) * W + (j + 1), up = i * W + (j + 1), left = (i + 1) * W + j, diag = i * W + j;
            sx[o] = xv + sx[up] + sx[left] - sx[diag];
            sy[o] = yv + sy[up] + sy[left] - sy[diag];
            sxx[o] = xv * xv + sxx[up] + sxx[left] - sxx[diag];
            syy[o] = yv * yv + syy[up] + syy[left] - syy[diag];
            sxy[o] = xv * yv + sxy[up] + sxy[left] - sxy[diag];
        }
    auto box = [&](const std::vector<double>& s, std::size_t i, std::size_t j) {
        return s[(i + win) * W + (j + win)] - s[i * W + (j + win)] - s[(i + win) * W + j] + s[i * W + j];
    };

    const double c1 = (p.k1 * p.max_val) * (p.k1 * p.max_val), c2 = (p.k2 * p.max_val) * (p.k2 * p.max_val);
    const double n = static_cast<double>(win * win);
    double total = 0.0;
    for (std::size_t i = 0; i + win <= h; ++i)
        for (std::size_t j = 0; j + win <= w; ++j) {
            const double mx = box(sx, i, j) / n, my = box(sy, i, j) / n;
            const double vx = box(sxx, i, j) / n - mx * mx, vy = box(syy, i, j) / n - my * my;
            const double cxy = box(sxy, i, j) / n - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    return total / static_cast<double>((h - win + 1) * (w - win + 1));
}

Tensor dilate(const Tensor& mask) {
    if (mask.rank() < 2) throw ShapeError("dilate needs a 2-D mask");
    const std::size_t h = mask.dim(mask.rank() - 2), w = mask.dim(mask.rank() - 1);
    if (mask.size() != h * w) throw ShapeError("dilate needs a single-plane mask");
    Tensor out(mask.shape());
    auto on = [&](std::size_t y, std::size_t x) { return mask[y * w + x] > 0.5; };
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const bool v = on(y, x) || (y > 0 && on(y - 1, x)) || (y + 1 < h && on(y + 1, x)) ||
                           (x > 0 && on(y, x - 1)) || (x + 1 < w && on(y, x + 1));
            out[y * w + x] = v ? 1.0 : 0.0;
        }
    return out;
}

double mask_iou(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw ShapeError("mask_iou: masks differ in size");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] > 0.5, pb = b[i] > 0.5;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double silhouette_iou(const Tensor& generated, const Tensor& sketch) {
    bool any = false;
    for (double v : sketch.data()) any = any || v > 0.5;
    if (!any) throw UsageError("silhouette_iou: sketch mask is empty");
    const Tensor edges = dilate(datagen::edge_map(generated));
    if (edges.size() != sketch.size()) throw ShapeError("silhouette_iou: sketch and image sizes differ");
    return mask_iou(edges, sketch);
}

}  // namespace latsketch::metrics
