// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/netpbm.hpp"

namespace latsketch::datagen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSuper = 4;  // supersamples per pixel axis

struct Point {
    double x, y;
};

// Canonical shapes are centered at the origin in pixel units (y down).
constexpr double kCircleRadius = 10.0;
constexpr double kSquareHalf = 8.5;
constexpr double kTriangleRadius = 11.0;
constexpr double kStarOuter = 11.0;
constexpr double kStarInner = 4.5;

bool inside_polygon(const Point* v, std::size_t n, Point p) {
    bool in = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y) &&
            p.x < (v[j].x - v[i].x) * (p.y - v[i].y) / (v[j].y - v[i].y) + v[i].x) {
            in = !in;
        }
    }
    return in;
}

const std::array<Point, 3>& triangle_vertices() {
    static const std::array<Point, 3> v = [] {
        std::array<Point, 3> out{};
        for (int i = 0; i < 3; ++i) {
            const double a = -kPi / 2 + 2 * kPi * i / 3;
            out[static_cast<std::size_t>(i)] = {kTriangleRadius * std::cos(a), kTriangleRadius * std::sin(a)};
        }
        return out;
    }();
    return v;
}

const std::array<Point, 10>& star_vertices() {
    static const std::array<Point, 10> v = [] {
        std::array<Point, 10> out{};
        for (int i = 0; i < 10; ++i) {
            const double r = i % 2 == 0 ? kStarOuter : kStarInner;
            const double a = -kPi / 2 + kPi * i / 5;
            out[static_cast<std::size_t>(i)] = {r * std::cos(a), r * std::sin(a)};
        }
        return out;
    }();
    return v;
}

bool inside(Silhouette s, Point p) {
    switch (s) {
        case Silhouette::circle: return p.x * p.x + p.y * p.y <= kCircleRadius * kCircleRadius;
        case Silhouette::square: return std::abs(p.x) <= kSquareHalf && std::abs(p.y) <= kSquareHalf;
        case Silhouette::triangle: return inside_polygon(triangle_vertices().data(), 3, p);
        case Silhouette::star: return inside_polygon(star_vertices().data(), 10, p);
        case Silhouette::crescent: {
            const double ox = p.x - 4.5, oy = p.y + 2.0;
            return p.x * p.x + p.y * p.y <= kCircleRadius * kCircleRadius && ox * ox + oy * oy > 64.0;
        }
    }
    return false;
}

struct TextureParams {
    double dot_ox = 0.0, dot_oy = 0.0;
};

bool accent_at(Texture t, Point p, const TextureParams& tp) {
    switch (t) {
        case Texture::solid: return false;
        case Texture::rings: return std::fmod(std::hypot(p.x, p.y), 5.0) < 2.0;
        case Texture::radial_stripes: {
            const double sector = 2 * kPi / 6;
            const double a = std::atan2(p.y, p.x) + 2 * kPi;
            return std::fmod(a, sector) < 0.35 * sector;
        }
        case Texture::dots: {
            const double spacing = 6.0;
            const double fx = std::fmod(p.x - tp.dot_ox + 600.0, spacing) - spacing / 2;
            const double fy = std::fmod(p.y - tp.dot_oy + 600.0, spacing) - spacing / 2;
            return fx * fx + fy * fy < 1.8 * 1.8;
        }
    }
    return false;
}

Rgb restyle(const Rgb& c, const StyleSpec& s) {
    return {std::clamp(c.r * s.multiply.r + s.add.r, 0.0, 1.0), std::clamp(c.g * s.multiply.g + s.add.g, 0.0, 1.0),
            std::clamp(c.b * s.multiply.b + s.add.b, 0.0, 1.0)};
}

// Pixel (px, py) supersample (i, j) mapped into the shape's canonical frame.
Point to_local(std::size_t size, const Placement& pl, std::size_t px, std::size_t py, int i, int j) {
    const double c = static_cast<double>(size) / 2.0;
    const double x = static_cast<double>(px) + (i + 0.5) / kSuper - c - pl.dx;
    const double y = static_cast<double>(py) + (j + 0.5) / kSuper - c - pl.dy;
    const double ca = std::cos(-pl.angle), sa = std::sin(-pl.angle);
    return {(ca * x - sa * y) / pl.scale, (sa * x + ca * y) / pl.scale};
}

void check_ids(const DatasetSpec& spec, std::size_t class_id, std::size_t style_id) {
    if (class_id >= spec.classes.size()) throw UsageError("class id " + std::to_string(class_id) + " out of range");
    if (style_id >= spec.styles.size()) throw UsageError("style id " + std::to_string(style_id) + " out of range");
}

}  // namespace

std::string to_string(Silhouette s) {
    switch (s) {
        case Silhouette::circle: return "circle";
        case Silhouette::square: return "square";
        case Silhouette::triangle: return "triangle";
        case Silhouette::star: return "star";
        case Silhouette::crescent: return "crescent";
    }
    return "unknown";
}

std::string to_string(Texture t) {
    switch (t) {
        case Texture::solid: return "solid";
        case Texture::rings: return "rings";
        case Texture::radial_stripes: return "radial-stripes";
        case Texture::dots: return "dots";
    }
    return "unknown";
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

DatasetSpec default_spec() {
    DatasetSpec spec;
    spec.classes = {
        {"orange", Silhouette::circle, Texture::solid, {1.0, 0.55, 0.05}, {1.0, 0.55, 0.05}},
        {"basketball", Silhouette::circle, Texture::radial_stripes, {0.75, 0.35, 0.10}, {0.45, 0.20, 0.05}},
        {"soccer", Silhouette::circle, Texture::dots, {0.55, 0.55, 0.60}, {0.35, 0.35, 0.40}},
        {"watermelon", Silhouette::circle, Texture::rings, {0.30, 0.70, 0.25}, {0.15, 0.45, 0.12}},
        {"square", Silhouette::square, Texture::solid, {0.20, 0.35, 0.85}, {0.20, 0.35, 0.85}},
        {"triangle", Silhouette::triangle, Texture::solid, {0.85, 0.15, 0.20}, {0.85, 0.15, 0.20}},
        {"star", Silhouette::star, Texture::solid, {0.60, 0.20, 0.70}, {0.60, 0.20, 0.70}},
        {"crescent", Silhouette::crescent, Texture::solid, {0.10, 0.55, 0.55}, {0.10, 0.55, 0.55}},
    };
    spec.styles = {
        {"day", {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}},
        {"night", {0.5, 0.55, 0.8}, {0.0, 0.0, 0.12}},
    };
    return spec;
}

Placement draw_placement(const PlacementJitter& jitter, nn::Rng& rng) {
    // Always four draws, in this order, whatever the jitter settings.
    Placement p;
    const double ux = rng.uniform(-1.0, 1.0), uy = rng.uniform(-1.0, 1.0);
    const double us = rng.uniform(-1.0, 1.0), ua = rng.uniform();
    p.dx = ux * jitter.position_px;
    p.dy = uy * jitter.position_px;
    p.scale = 1.0 + us * jitter.scale;
    p.angle = jitter.rotate ? ua * 2 * kPi : 0.0;
    return p;
}

Tensor silhouette_mask(const DatasetSpec& spec, std::size_t class_id, const Placement& placement) {
    check_ids(spec, class_id, 0);
    const std::size_t s = spec.image_size;
    const Silhouette shape = spec.classes[class_id].silhouette;
    Tensor mask({1, s, s});
    for (std::size_t py = 0; py < s; ++py)
        for (std::size_t px = 0; px < s; ++px) {
            int hits = 0;
            for (int j = 0; j < kSuper; ++j)
                for (int i = 0; i < kSuper; ++i) hits += inside(shape, to_local(s, placement, px, py, i, j));
            mask[py * s + px] = 2 * hits >= kSuper * kSuper ? 1.0 : 0.0;
        }
    return mask;
}

DataItem render_item(const DatasetSpec& spec, std::size_t class_id, std::size_t style_id, nn::Rng& rng) {
    check_ids(spec, class_id, style_id);
    const Placement pl = draw_placement(spec.jitter, rng);
    TextureParams tp;
    tp.dot_ox = rng.uniform(0.0, 6.0);
    tp.dot_oy = rng.uniform(0.0, 6.0);

    const ClassSpec& cls = spec.classes[class_id];
    const StyleSpec& style = spec.styles[style_id];
    const Rgb base = restyle(cls.base, style), accent = restyle(cls.accent, style);
    const std::size_t s = spec.image_size, hw = s * s;
    constexpr double kSamples = kSuper * kSuper;

    DataItem item;
    item.class_id = class_id;
    item.style_id = style_id;
    item.image = Tensor({3, s, s});
    for (std::size_t py = 0; py < s; ++py)
        for (std::size_t px = 0; px < s; ++px) {
            double r = 0, g = 0, b = 0;
            for (int j = 0; j < kSuper; ++j)
                for (int i = 0; i < kSuper; ++i) {
                    const Point p = to_local(s, pl, px, py, i, j);
                    Rgb c;  // white background
                    if (inside(cls.silhouette, p)) c = accent_at(cls.texture, p, tp) ? accent : base;
                    r += c.r;
                    g += c.g;
                    b += c.b;
                }
            const std::size_t at = py * s + px;
            item.image[at] = io::from_byte(io::to_byte(r / kSamples));
            item.image[hw + at] = io::from_byte(io::to_byte(g / kSamples));
            item.image[2 * hw + at] = io::from_byte(io::to_byte(b / kSamples));
        }
    return item;
}

}  // namespace latsketch::datagen
