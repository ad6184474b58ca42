// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "latsketch/nn/tensor.hpp"

namespace latsketch::nn {

/// Counter-based generator: the i-th draw is a pure function of (key, i).
///
/// The key is derived from a seed and a path of substream labels, so the
/// "init", "noise" and "data" streams of one run never overlap and a
/// per-request stream can be reconstructed from its seed alone. Output is
/// the SplitMix64 finalizer over key + i * golden-gamma.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    Rng substream(std::string_view label) const;
    Rng substream(std::uint64_t index) const;

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller; pairs are cached so no draw is wasted.
    double normal();

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    Rng(std::uint64_t key, int) : key_(key) {}

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t hash_label(std::string_view label) noexcept;

Tensor randn(const Shape& shape, Rng& rng);

/// i.i.d. N(0, std^2) samples. Throws UsageError unless std > 0.
Tensor init_normal(const Shape& shape, double std, Rng& rng);

}  // namespace latsketch::nn
