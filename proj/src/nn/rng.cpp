// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/rng.hpp"

#include <cmath>
#include <numbers>

#include "latsketch/error.hpp"

namespace latsketch::nn {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_label(std::string_view label) noexcept {
    // FNV-1a, then finalized so short labels still spread across all bits.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(h);
}

Rng::Rng(std::uint64_t seed) : key_(splitmix64(seed + kGamma)) {}

Rng Rng::substream(std::string_view label) const {
    return Rng(splitmix64(key_ ^ hash_label(label)), 0);
}

Rng Rng::substream(std::uint64_t index) const {
    return Rng(splitmix64(key_ ^ splitmix64(index * kGamma + 0x632BE59BD9B4E019ULL)), 0);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return splitmix64(key_ + counter_ * kGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw UsageError("Rng::below(0)");
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Tensor randn(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

Tensor init_normal(const Shape& shape, double std, Rng& rng) {
    if (!(std > 0.0)) throw UsageError("init_normal requires std > 0");
    Tensor t(shape);
    for (double& v : t.data()) v = std * rng.normal();
    return t;
}

}  // namespace latsketch::nn
