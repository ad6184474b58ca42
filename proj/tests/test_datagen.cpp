// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "fixtures.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/netpbm.hpp"
#include "latsketch/metrics/image_metrics.hpp"

using namespace latsketch;
using namespace latsketch::datagen;
using nn::Tensor;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

double count_on(const Tensor& t) {
    double s = 0;
    for (double v : t.data()) s += v > 0.5;
    return s;
}

Tensor step_image(std::size_t s, double left, double right) {
    Tensor img({3, s, s});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x) img[(c * s + y) * s + x] = x < s / 2 ? left : right;
    return img;
}

}  // namespace

TEST_CASE("default spec: 8 classes, 4 sharing the circle silhouette, 2 styles") {
    const DatasetSpec spec = default_spec();
    REQUIRE(spec.classes.size() == 8);
    CHECK(spec.styles.size() == 2);
    std::size_t circles = 0;
    for (const auto& c : spec.classes) circles += c.silhouette == Silhouette::circle;
    CHECK(circles == 4);
    CHECK(to_string(Silhouette::crescent) == "crescent");
    CHECK(to_string(Texture::radial_stripes) == "radial-stripes");
    CHECK(to_string(Split::test) == "test");
}

TEST_CASE("circle classes share identical silhouettes under the same placement") {
    const DatasetSpec spec = default_spec();
    nn::Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Placement p = draw_placement(spec.jitter, rng);
        const Tensor ref = silhouette_mask(spec, 0, p);
        for (std::size_t c = 1; c < 4; ++c) CHECK(silhouette_mask(spec, c, p).storage() == ref.storage());
        CHECK(silhouette_mask(spec, 4, p).storage() != ref.storage());
    }
    // Unjittered circle of radius 10: area pi r^2 up to pixel coverage.
    const Tensor disk = silhouette_mask(spec, 0, Placement{});
    CHECK(count_on(disk) == doctest::Approx(std::numbers::pi * 100.0).epsilon(0.03));
    // Side-17 square centred on a pixel corner: the edge pixels are half
    // covered and kept (coverage >= 0.5), the four quarter-covered corners are not.
    const Tensor sq = silhouette_mask(spec, 4, Placement{});
    CHECK(count_on(sq) == 18.0 * 18.0 - 4.0);
}

TEST_CASE("placement draws respect the jitter bounds") {
    const PlacementJitter j;
    nn::Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const Placement p = draw_placement(j, rng);
        CHECK(std::abs(p.dx) <= j.position_px);
        CHECK(std::abs(p.dy) <= j.position_px);
        CHECK(std::abs(p.scale - 1.0) <= j.scale);
        CHECK(p.angle >= 0.0);
        CHECK(p.angle < 2 * std::numbers::pi);
    }
    PlacementJitter none{0.0, 0.0, false};
    const Placement p = draw_placement(none, rng);
    CHECK(p.dx == 0.0);
    CHECK(p.scale == 1.0);
    CHECK(p.angle == 0.0);
}

TEST_CASE("edge map of a luminance step matches the analytic Sobel response") {
    // Step 0 -> 1 between columns 3 and 4: |gx| / 8 = 0.5 on both columns,
    // then one pixel of dilation on each side.
    const Tensor e = edge_map(step_image(8, 0.0, 1.0));
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) CHECK(e[y * 8 + x] == ((x >= 2 && x <= 5) ? 1.0 : 0.0));
    // A 0.2 step gives 0.1 < threshold: no edges.
    CHECK(count_on(edge_map(step_image(8, 0.4, 0.6))) == 0.0);
    CHECK(count_on(edge_map(Tensor({3, 8, 8}, 0.7))) == 0.0);
    CHECK_THROWS_AS(edge_map(Tensor({1, 8, 8})), ShapeError);
}

TEST_CASE("rendered items are quantized, in range, and have edges around the object") {
    const DatasetSpec spec = default_spec();
    nn::Rng rng(8);
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const DataItem it = render_item(spec, c, c % 2, rng);
        CHECK(it.image.shape() == nn::Shape{3, 32, 32});
        for (double v : it.image.data()) {
            CHECK_UNARY(v >= 0.0 && v <= 1.0);
            CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
        }
        const Tensor e = edge_map(it.image);
        CHECK(count_on(e) > 30);
        // The background corner is plain white in day style.
        if (c % 2 == 0) CHECK(it.image[0] == 1.0);
    }
    CHECK_THROWS_AS(render_item(spec, 99, 0, rng), UsageError);
}

TEST_CASE("jitter is identity at zero strength and perturbs strokes otherwise") {
    const Tensor edges = testing::small_dataset().items[3].edges;
    nn::Rng rng(9);
    CHECK(jitter_sketch(edges, 0.0, rng).storage() == edges.storage());
    nn::Rng a(10), b(10);
    const Tensor j1 = jitter_sketch(edges, 0.5, a), j2 = jitter_sketch(edges, 0.5, b);
    CHECK(j1.storage() == j2.storage());
    CHECK(j1.storage() != edges.storage());
    for (double v : j1.data()) CHECK_UNARY(v == 0.0 || v == 1.0);
    const double before = count_on(edges), after = count_on(j1);
    CHECK(after > 0.5 * before);
    CHECK(after < 1.2 * before);
    CHECK_THROWS_AS(jitter_sketch(edges, 1.5, rng), UsageError);
    CHECK_THROWS_AS(jitter_sketch(Tensor({3, 4, 4}), 0.5, rng), ShapeError);
}

TEST_CASE("dataset generation is deterministic with a 10 percent test split") {
    const Dataset a = generate_dataset(testing::small_spec(20, 7));
    const Dataset b = generate_dataset(testing::small_spec(20, 7));
    const Dataset c = generate_dataset(testing::small_spec(20, 8));
    REQUIRE(a.items.size() == 160);
    CHECK(a.select(Split::test).size() == 16);
    CHECK(a.select(Split::train).size() == 144);
    bool differs = false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].image.storage() == b.items[i].image.storage());
        CHECK(a.items[i].edges.storage() == b.items[i].edges.storage());
        CHECK(a.items[i].id == i);
        CHECK(a.items[i].class_id == i / 20);
        CHECK(a.items[i].style_id == (i % 20) % 2);
        differs = differs || a.items[i].image.storage() != c.items[i].image.storage();
    }
    CHECK(differs);
    std::vector<std::size_t> test_per_class_style(8 * 2, 0);
    for (const DataItem* it : a.select(Split::test)) ++test_per_class_style[it->class_id * 2 + it->style_id];
    for (std::size_t n : test_per_class_style) CHECK(n == 1);
    CHECK(a.class_id("star") == 6);
    CHECK(a.style_id("night") == 1);
    CHECK_THROWS_AS(a.class_id("dog"), UsageError);
    CHECK_THROWS_AS(generate_dataset(testing::small_spec(0, 7)), UsageError);
}

TEST_CASE("written datasets are byte-identical across runs and load back exactly") {
    testing::TempDir d1("ds1"), d2("ds2");
    const DatasetSpec spec = testing::small_spec(10, 7);
    const Dataset written = write_dataset(spec, d1.path() / "data", false);
    write_dataset(spec, d2.path() / "data", false);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(d1.path() / "data")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), d1.path());
        CHECK(slurp(entry.path()) == slurp(d2.path() / rel));
    }
    const auto manifest = nlohmann::json::parse(slurp(d1.path() / "data" / "manifest.json"));
    CHECK(manifest.at("version") == 1);
    CHECK(manifest.at("items").size() == 80);
    CHECK(manifest.at("items")[9].at("split") == "test");
    CHECK(manifest.at("items")[9].at("image") == "img/000009.ppm");
    CHECK(manifest.at("classes")[1].at("name") == "basketball");

    const Dataset loaded = load_dataset(d1.path() / "data");
    REQUIRE(loaded.items.size() == written.items.size());
    for (std::size_t i = 0; i < loaded.items.size(); ++i) {
        CHECK(loaded.items[i].image.storage() == written.items[i].image.storage());
        CHECK(loaded.items[i].edges.storage() == written.items[i].edges.storage());
        CHECK(loaded.items[i].split == written.items[i].split);
    }
    CHECK(loaded.class_names == written.class_names);

    CHECK_THROWS_AS(write_dataset(spec, d1.path() / "data", false), DataError);
    CHECK_NOTHROW(write_dataset(spec, d1.path() / "data", true));
    CHECK_THROWS_AS(load_dataset(d1.path() / "nothing"), DataError);
    std::ofstream(d1.path() / "data" / "manifest.json") << "{ not json";
    CHECK_THROWS_AS(load_dataset(d1.path() / "data"), DataError);
}

namespace {

DatasetSpec single_class_spec(Silhouette sil, Texture tex) {
    DatasetSpec spec = default_spec();
    ClassSpec c = spec.classes[0];
    c.silhouette = sil;
    c.texture = tex;
    spec.classes = {c};
    spec.styles = {spec.styles[0]};
    spec.jitter = {0.0, 0.0, false};
    return spec;
}

// Separable [1, 6, 1] / 8 blur with replicated borders, requantized to 8 bits:
// the mild smoothing and rounding a decoder introduces.
Tensor decode_like(const Tensor& img) {
    const std::size_t s = img.shape()[1];
    auto clampi = [s](std::ptrdiff_t v) { return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, s - 1)); };
    Tensor rows({3, s, s}), out({3, s, s});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x) {
                const auto xi = static_cast<std::ptrdiff_t>(x);
                rows[(c * s + y) * s + x] = (img[(c * s + y) * s + clampi(xi - 1)] + 6 * img[(c * s + y) * s + x] +
                                             img[(c * s + y) * s + clampi(xi + 1)]) / 8;
            }
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x) {
                const auto yi = static_cast<std::ptrdiff_t>(y);
                const double v = (rows[(c * s + clampi(yi - 1)) * s + x] + 6 * rows[(c * s + y) * s + x] +
                                  rows[(c * s + clampi(yi + 1)) * s + x]) / 8;
                out[(c * s + y) * s + x] = std::round(v * 255.0) / 255.0;
            }
    return out;
}

}  // namespace

TEST_CASE("edges of a solid circle form a ring within 2 px of the analytic boundary") {
    const DatasetSpec spec = single_class_spec(Silhouette::circle, Texture::solid);
    nn::Rng rng(1);
    const DataItem item = render_item(spec, 0, 0, rng);
    const Tensor edges = edge_map(item.image);
    // Radius from the covered area, independent of the renderer's constants.
    const Tensor mask = silhouette_mask(spec, 0, Placement{});
    const double radius = std::sqrt(count_on(mask) / std::numbers::pi);
    std::size_t on = 0;
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            if (edges[y * 32 + x] < 0.5) continue;
            ++on;
            const double d = std::hypot(x + 0.5 - 16.0, y + 0.5 - 16.0);
            CHECK(std::abs(d - radius) <= 2.0);
        }
    // The ring closes: every angle has an edge pixel near the boundary.
    for (int a = 0; a < 64; ++a) {
        const double th = 2 * std::numbers::pi * a / 64;
        bool hit = false;
        for (double r = radius - 1.5; r <= radius + 1.5; r += 0.25) {
            const auto x = static_cast<std::size_t>(16.0 + r * std::cos(th));
            const auto y = static_cast<std::size_t>(16.0 + r * std::sin(th));
            hit = hit || edges[y * 32 + x] > 0.5;
        }
        CHECK(hit);
    }
    CHECK(on > 0);
}

TEST_CASE("edge maps are stable under a decode-like smoothing round-trip") {
    for (const DataItem& it : testing::small_dataset().items) {
        const double iou = metrics::mask_iou(it.edges, edge_map(decode_like(it.image)));
        CHECK_MESSAGE(iou > 0.9, "item " << it.id);
    }
}

TEST_CASE("jitter at strength 0.5 keeps IoU with the original strokes in (0.3, 0.95)") {
    const nn::Rng base(11);
    for (const DataItem& it : testing::small_dataset().items) {
        nn::Rng rng = base.substream(it.id);
        const double iou = metrics::mask_iou(it.edges, jitter_sketch(it.edges, 0.5, rng));
        CHECK_MESSAGE(iou > 0.3, "item " << it.id);
        CHECK_MESSAGE(iou < 0.95, "item " << it.id);
    }
}

TEST_CASE("circle classes are ambiguous in silhouette but distinct in appearance") {
    const DatasetSpec spec = default_spec();
    const nn::Rng base(21);
    std::vector<std::size_t> circles;
    for (std::size_t c = 0; c < spec.classes.size(); ++c)
        if (spec.classes[c].silhouette == Silhouette::circle) circles.push_back(c);
    REQUIRE(circles.size() == 4);
    for (std::size_t style = 0; style < spec.styles.size(); ++style)
        for (std::uint64_t draw = 0; draw < 10; ++draw) {
            std::vector<DataItem> items;
            for (std::size_t c : circles) {
                nn::Rng rng = base.substream(draw);
                items.push_back(render_item(spec, c, style, rng));
            }
            for (std::size_t i = 0; i < items.size(); ++i)
                for (std::size_t j = i + 1; j < items.size(); ++j) {
                    // Pixels visibly off-white are the object.
                    Tensor mi({1, 32, 32}), mj({1, 32, 32});
                    double dist = 0;
                    for (std::size_t p = 0; p < 32 * 32; ++p) {
                        double di = 0, dj = 0, d2 = 0;
                        for (std::size_t c = 0; c < 3; ++c) {
                            const double a = items[i].image[c * 1024 + p], b = items[j].image[c * 1024 + p];
                            di = std::max(di, 1 - a);
                            dj = std::max(dj, 1 - b);
                            d2 += (a - b) * (a - b);
                        }
                        mi[p] = di > 0.1 ? 1 : 0;
                        mj[p] = dj > 0.1 ? 1 : 0;
                        dist += std::sqrt(d2);  // Euclidean distance in RGB space
                    }
                    CHECK(metrics::mask_iou(mi, mj) > 0.95);
                    CHECK(dist / (32 * 32) > 0.05);
                }
        }
}
