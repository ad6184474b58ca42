// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/netpbm.hpp"

namespace latsketch::datagen {

namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

std::string item_stem(std::size_t id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", id);
    return buf;
}

void validate(const DatasetSpec& spec) {
    if (spec.classes.empty()) throw UsageError("dataset needs at least one class");
    if (spec.styles.empty()) throw UsageError("dataset needs at least one style");
    if (spec.per_class == 0) throw UsageError("per_class must be positive");
    if (spec.image_size < 8) throw UsageError("image_size must be at least 8");
}

}  // namespace

std::vector<const DataItem*> Dataset::select(Split split) const {
    std::vector<const DataItem*> out;
    for (const DataItem& it : items)
        if (it.split == split) out.push_back(&it);
    return out;
}

std::size_t Dataset::class_id(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name) return i;
    std::string valid;
    for (const auto& n : class_names) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown class '" + name + "'; valid classes: " + valid);
}

std::size_t Dataset::style_id(const std::string& name) const {
    for (std::size_t i = 0; i < style_names.size(); ++i)
        if (style_names[i] == name) return i;
    std::string valid;
    for (const auto& n : style_names) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown style '" + name + "'; valid styles: " + valid);
}

Dataset generate_dataset(const DatasetSpec& spec) {
    validate(spec);
    Dataset ds;
    ds.image_size = spec.image_size;
    ds.seed = spec.seed;
    ds.per_class = spec.per_class;
    for (const auto& c : spec.classes) ds.class_names.push_back(c.name);
    for (const auto& s : spec.styles) ds.style_names.push_back(s.name);

    const nn::Rng data = nn::Rng(spec.seed).substream("data");
    ds.items.reserve(spec.classes.size() * spec.per_class);
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        for (std::size_t j = 0; j < spec.per_class; ++j) {
            const std::size_t id = c * spec.per_class + j;
            nn::Rng rng = data.substream(id);
            DataItem item = render_item(spec, c, j % spec.styles.size(), rng);
            item.id = id;
            item.edges = edge_map(item.image);
            item.split = j % 10 == (j / 10 % 2 == 0 ? 9 : 8) ? Split::test : Split::train;
            ds.items.push_back(std::move(item));
        }
    }
    return ds;
}

nlohmann::ordered_json manifest_json(const Dataset& ds) {
    nlohmann::ordered_json j;
    j["version"] = kManifestVersion;
    j["image_size"] = ds.image_size;
    j["seed"] = ds.seed;
    j["per_class"] = ds.per_class;
    j["classes"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ds.class_names.size(); ++i) j["classes"].push_back({{"id", i}, {"name", ds.class_names[i]}});
    j["styles"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ds.style_names.size(); ++i) j["styles"].push_back({{"id", i}, {"name", ds.style_names[i]}});
    j["items"] = nlohmann::ordered_json::array();
    for (const DataItem& it : ds.items) {
        const std::string stem = item_stem(it.id);
        j["items"].push_back({{"id", it.id},
                              {"image", "img/" + stem + ".ppm"},
                              {"edges", "edge/" + stem + ".pgm"},
                              {"class_id", it.class_id},
                              {"style_id", it.style_id},
                              {"split", to_string(it.split)}});
    }
    return j;
}

Dataset write_dataset(const DatasetSpec& spec, const fs::path& out_dir, bool overwrite) {
    validate(spec);
    std::error_code ec;
    if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
        if (!overwrite) throw DataError("output directory " + out_dir.string() + " is not empty (use --force)");
        for (const char* sub : {"img", "edge", "manifest.json", "run.json"}) fs::remove_all(out_dir / sub, ec);
    }
    fs::create_directories(out_dir / "img", ec);
    fs::create_directories(out_dir / "edge", ec);
    if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

    Dataset ds = generate_dataset(spec);
    for (const DataItem& it : ds.items) {
        const std::string stem = item_stem(it.id);
        io::write_ppm(out_dir / "img" / (stem + ".ppm"), it.image);
        io::write_pgm(out_dir / "edge" / (stem + ".pgm"), it.edges);
    }
    std::ofstream f(out_dir / "manifest.json", std::ios::binary);
    f << manifest_json(ds).dump(2) << '\n';
    if (!f) throw DataError("cannot write " + (out_dir / "manifest.json").string());
    return ds;
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.json";
    std::ifstream f(manifest, std::ios::binary);
    if (!f) throw DataError("cannot open " + manifest.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed " + manifest.string() + ": " + e.what());
    }
    Dataset ds;
    try {
        if (j.at("version").get<int>() != kManifestVersion) throw DataError("unsupported manifest version");
        ds.image_size = j.at("image_size").get<std::size_t>();
        ds.seed = j.value("seed", std::uint64_t{0});
        ds.per_class = j.value("per_class", std::size_t{0});
        for (const auto& c : j.at("classes")) ds.class_names.push_back(c.at("name").get<std::string>());
        for (const auto& s : j.at("styles")) ds.style_names.push_back(s.at("name").get<std::string>());
        for (const auto& ji : j.at("items")) {
            DataItem it;
            it.id = ji.at("id").get<std::size_t>();
            it.class_id = ji.at("class_id").get<std::size_t>();
            it.style_id = ji.at("style_id").get<std::size_t>();
            const std::string split = ji.at("split").get<std::string>();
            if (split != "train" && split != "test") throw DataError("item " + std::to_string(it.id) + ": bad split");
            it.split = split == "train" ? Split::train : Split::test;
            if (it.class_id >= ds.class_names.size() || it.style_id >= ds.style_names.size())
                throw DataError("item " + std::to_string(it.id) + ": class or style id out of range");
            it.image = io::read_netpbm(dir / ji.at("image").get<std::string>());
            it.edges = io::read_netpbm(dir / ji.at("edges").get<std::string>());
            const nn::Shape want_img{3, ds.image_size, ds.image_size}, want_edge{1, ds.image_size, ds.image_size};
            if (it.image.shape() != want_img || it.edges.shape() != want_edge)
                throw DataError("item " + std::to_string(it.id) + ": image size does not match manifest");
            ds.items.push_back(std::move(it));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed " + manifest.string() + ": " + e.what());
    }
    return ds;
}

}  // namespace latsketch::datagen
