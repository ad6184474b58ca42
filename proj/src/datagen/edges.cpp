// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"

namespace latsketch::datagen {

Tensor edge_map(const Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("edge_map needs [3, H, W], got " + nn::shape_str(rgb.shape()));
    const std::size_t h = rgb.dim(1), w = rgb.dim(2), hw = h * w;
    std::vector<double> lum(hw);
    for (std::size_t i = 0; i < hw; ++i) lum[i] = 0.299 * rgb[i] + 0.587 * rgb[hw + i] + 0.114 * rgb[2 * hw + i];

    auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
        y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
        x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
        return lum[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    std::vector<std::uint8_t> raw(hw, 0);
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(h); ++y) {
        for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(w); ++x) {
            const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
            raw[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] =
                std::sqrt(gx * gx + gy * gy) / 8.0 > kEdgeThreshold;
        }
    }
    Tensor out({1, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            bool on = raw[y * w + x];
            on = on || (y > 0 && raw[(y - 1) * w + x]) || (y + 1 < h && raw[(y + 1) * w + x]);
            on = on || (x > 0 && raw[y * w + x - 1]) || (x + 1 < w && raw[y * w + x + 1]);
            out[y * w + x] = on ? 1.0 : 0.0;
        }
    return out;
}

Tensor jitter_sketch(const Tensor& edges, double strength, nn::Rng& rng) {
    if (edges.rank() != 3 || edges.dim(0) != 1) throw ShapeError("jitter_sketch needs [1, H, W]");
    if (!(strength >= 0.0 && strength <= 1.0)) throw UsageError("jitter strength must lie in [0, 1]");
    if (strength == 0.0) return edges;
    const std::size_t h = edges.dim(1), w = edges.dim(2);

    // Smooth field: 5x5 control grid of uniform offsets, bilinearly spread.
    constexpr std::size_t kGrid = 5;
    double ctrl[2][kGrid][kGrid];
    for (auto& plane : ctrl)
        for (auto& row : plane)
            for (double& v : row) v = rng.uniform(-1.0, 1.0);
    std::vector<double> fx(h * w), fy(h * w);
    double peak = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double gy = static_cast<double>(y) * (kGrid - 1) / static_cast<double>(h - 1);
            const double gx = static_cast<double>(x) * (kGrid - 1) / static_cast<double>(w - 1);
            const auto y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), kGrid - 2);
            const auto x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), kGrid - 2);
            const double ty = gy - static_cast<double>(y0), tx = gx - static_cast<double>(x0);
            double d[2];
            for (int k = 0; k < 2; ++k) {
                d[k] = (1 - ty) * ((1 - tx) * ctrl[k][y0][x0] + tx * ctrl[k][y0][x0 + 1]) +
                       ty * ((1 - tx) * ctrl[k][y0 + 1][x0] + tx * ctrl[k][y0 + 1][x0 + 1]);
            }
            fx[y * w + x] = d[0];
            fy[y * w + x] = d[1];
            peak = std::max(peak, std::hypot(d[0], d[1]));
        }
    const double gain = peak > 0.0 ? strength * 3.0 / peak : 0.0;

    Tensor out({1, h, w});
    std::size_t on = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (edges[y * w + x] <= 0.5) continue;
            const auto ny = std::lround(static_cast<double>(y) + gain * fy[y * w + x]);
            const auto nx = std::lround(static_cast<double>(x) + gain * fx[y * w + x]);
            const auto cy = static_cast<std::size_t>(std::clamp<long>(ny, 0, static_cast<long>(h) - 1));
            const auto cx = static_cast<std::size_t>(std::clamp<long>(nx, 0, static_cast<long>(w) - 1));
            if (out[cy * w + cx] == 0.0) ++on;
            out[cy * w + cx] = 1.0;
        }

    const double drop_fraction = rng.uniform(0.0, strength * 0.2);
    const auto target = static_cast<std::size_t>(drop_fraction * static_cast<double>(on));
    std::size_t erased = 0;
    while (erased < target) {
        // Pick the k-th remaining stroke pixel, then clear its 3x3 blob.
        std::size_t k = rng.below(on - erased);
        std::size_t idx = 0;
        for (; idx < h * w; ++idx) {
            if (out[idx] > 0.5 && k-- == 0) break;
        }
        const std::size_t y = idx / w, x = idx % w;
        for (std::size_t yy = y > 0 ? y - 1 : 0; yy <= std::min(y + 1, h - 1); ++yy)
            for (std::size_t xx = x > 0 ? x - 1 : 0; xx <= std::min(x + 1, w - 1); ++xx) {
                if (out[yy * w + xx] > 0.5) {
                    out[yy * w + xx] = 0.0;
                    ++erased;
                }
            }
    }
    return out;
}

}  // namespace latsketch::datagen
