// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "latsketch/nn/tensor.hpp"

namespace latsketch::io {

// Binary 8-bit netpbm images. In memory an image is a [C, H, W] tensor with
// values in [0, 1]; bytes are round(clamp(v, 0, 1) * 255).

std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// Interleaved 8-bit bytes (HWC) of a [C, H, W] tensor, and back.
std::vector<std::uint8_t> to_bytes(const nn::Tensor& chw);
nn::Tensor from_bytes(std::span<const std::uint8_t> bytes, std::size_t channels, std::size_t height,
                      std::size_t width);

std::vector<std::uint8_t> encode_netpbm(const nn::Tensor& chw);  // P5 for 1 channel, P6 for 3
nn::Tensor decode_netpbm(std::span<const std::uint8_t> bytes);

void write_ppm(const std::filesystem::path& path, const nn::Tensor& rgb);
void write_pgm(const std::filesystem::path& path, const nn::Tensor& gray);
/// Reads P5 or P6; throws DataError on anything else.
nn::Tensor read_netpbm(const std::filesystem::path& path);

}  // namespace latsketch::io
