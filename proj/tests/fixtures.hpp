// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

// Shared test fixtures: a small dataset and a briefly trained, frozen
// backbone + LCTN. Built once per test binary.

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "latsketch/backbone/training.hpp"
#include "latsketch/datagen/dataset.hpp"
#include "latsketch/lctn/lctn.hpp"

namespace latsketch::testing {

inline datagen::DatasetSpec small_spec(std::size_t per_class = 10, std::uint64_t seed = 7) {
    datagen::DatasetSpec spec = datagen::default_spec();
    spec.per_class = per_class;
    spec.seed = seed;
    return spec;
}

inline const datagen::Dataset& small_dataset() {
    static const datagen::Dataset ds = datagen::generate_dataset(small_spec());
    return ds;
}

inline backbone::BackboneConfig small_backbone_config(const datagen::Dataset& ds) {
    backbone::BackboneConfig cfg;
    cfg.class_names = ds.class_names;
    cfg.style_names = ds.style_names;
    return cfg;
}

/// Trained for a handful of steps only: enough for every stage to be
/// marked trained and produce finite outputs.
inline std::unique_ptr<backbone::BackboneBundle> make_quick_backbone(std::uint64_t seed = 1) {
    const auto& ds = small_dataset();
    auto bundle = std::make_unique<backbone::BackboneBundle>(small_backbone_config(ds), seed);
    backbone::AutoencoderTrainConfig ac;
    ac.steps = 30;
    ac.batch = 8;
    backbone::train_autoencoder(*bundle, ds, ac, nn::Rng(seed).substream("ae"));
    backbone::DenoiserTrainConfig dc;
    dc.steps = 30;
    dc.batch = 8;
    backbone::train_denoiser(*bundle, ds, dc, nn::Rng(seed).substream("dn"));
    bundle->freeze();
    return bundle;
}

inline const backbone::BackboneBundle& quick_backbone() {
    static const std::unique_ptr<backbone::BackboneBundle> b = make_quick_backbone();
    return *b;
}

inline const lctn::LctnModel& quick_lctn() {
    static const std::unique_ptr<lctn::LctnModel> m = [] {
        lctn::LctnTrainConfig cfg;
        cfg.iters = 40;
        cfg.warmup = 10;
        return lctn::train_lctn(quick_backbone(), small_dataset(), cfg, nn::Rng(3));
    }();
    return *m;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("latsketch_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace latsketch::testing
