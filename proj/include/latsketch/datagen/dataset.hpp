// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latsketch/nn/rng.hpp"
#include "latsketch/nn/tensor.hpp"

namespace latsketch::datagen {

using nn::Tensor;

enum class Silhouette { circle, square, triangle, star, crescent };
enum class Texture { solid, rings, radial_stripes, dots };

std::string to_string(Silhouette s);
std::string to_string(Texture t);

struct Rgb {
    double r = 1.0, g = 1.0, b = 1.0;
};

struct ClassSpec {
    std::string name;
    Silhouette silhouette;
    Texture texture;
    Rgb base;
    Rgb accent;  // texture color; unused for solid
};

/// Palette transform applied to object colors: c' = clamp(c * multiply + add).
/// The white background is never restyled.
struct StyleSpec {
    std::string name;
    Rgb multiply{1.0, 1.0, 1.0};
    Rgb add{0.0, 0.0, 0.0};
};

struct PlacementJitter {
    double position_px = 3.0;  // uniform in [-p, p] on each axis
    double scale = 0.15;       // uniform in [1 - s, 1 + s]
    bool rotate = true;        // uniform angle in [0, 2 pi)
};

struct DatasetSpec {
    std::vector<ClassSpec> classes;
    std::vector<StyleSpec> styles;
    std::size_t per_class = 200;
    std::size_t image_size = 32;
    std::uint64_t seed = 7;
    PlacementJitter jitter;
};

/// Eight classes: four circle silhouettes that differ only in texture and
/// palette (orange, basketball, soccer, watermelon) plus square, triangle,
/// star and crescent; styles "day" (identity) and "night".
DatasetSpec default_spec();

enum class Split { train, test };
std::string to_string(Split s);

struct DataItem {
    std::size_t id = 0;
    Tensor image;  // [3, S, S] in [0, 1], quantized to 8 bits
    Tensor edges;  // [1, S, S] in {0, 1}
    std::size_t class_id = 0;
    std::size_t style_id = 0;
    Split split = Split::train;
};

struct Dataset {
    std::size_t image_size = 32;
    std::uint64_t seed = 0;
    std::size_t per_class = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> style_names;
    std::vector<DataItem> items;

    std::vector<const DataItem*> select(Split split) const;
    std::size_t class_id(const std::string& name) const;
    std::size_t style_id(const std::string& name) const;
};

/// Geometric pose of one rendered object. Drawn first from the item stream,
/// so two classes sharing a silhouette get identical masks for the same draw.
struct Placement {
    double dx = 0.0, dy = 0.0, scale = 1.0, angle = 0.0;
};

Placement draw_placement(const PlacementJitter& jitter, nn::Rng& rng);

/// Binary coverage mask ([1, S, S], coverage >= 0.5) of a class silhouette.
Tensor silhouette_mask(const DatasetSpec& spec, std::size_t class_id, const Placement& placement);

/// Anti-aliased render on white; edges are left empty. Throws UsageError on bad ids.
DataItem render_item(const DatasetSpec& spec, std::size_t class_id, std::size_t style_id, nn::Rng& rng);

/// Sobel magnitude of luminance (normalized by 1/8, replicated borders),
/// thresholded at kEdgeThreshold and dilated by one pixel (4-neighbourhood).
/// Output is [1, H, W] with values in {0, 1}. Uses no randomness.
inline constexpr double kEdgeThreshold = 0.15;
Tensor edge_map(const Tensor& rgb);

/// Simulated freehand sketch: a smooth random displacement field with
/// maximum magnitude strength * 3 px moves every stroke pixel, then up to
/// strength * 20% of stroke pixels are erased in 3x3 blobs.
Tensor jitter_sketch(const Tensor& edges, double strength, nn::Rng& rng);

/// Renders every item in memory: class-major ids, styles alternating within
/// a class, one item per block of ten held out for test (offset 9 in even
/// blocks, 8 in odd blocks, so both parities of style reach the test split).
Dataset generate_dataset(const DatasetSpec& spec);

/// generate_dataset plus files: manifest.json, img/NNNNNN.ppm, edge/NNNNNN.pgm.
/// Refuses a non-empty directory unless `overwrite`.
Dataset write_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, bool overwrite);

Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::ordered_json manifest_json(const Dataset& dataset);

}  // namespace latsketch::datagen
