// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latsketch/nn/tensor.hpp"

namespace latsketch::io {

/// DSK1 container shared by every trainable artifact:
///
///   "DSK1" | u32 LE header length | UTF-8 JSON header | payload
///
/// The header lists {name, shape, dtype "f32", byte_offset} per tensor;
/// the payload is the concatenation of little-endian float32 arrays.
/// Values are rounded from double to float on write.
struct NamedTensor {
    std::string name;
    nn::Tensor value;
};

struct Checkpoint {
    std::string model_kind;
    std::vector<NamedTensor> tensors;
    nlohmann::json metadata = nlohmann::json::object();

    const nn::Tensor& tensor(const std::string& name) const;
};

inline constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Little-endian float32 image of the tensors, in order (the DSK1 payload).
std::vector<std::uint8_t> f32_payload(std::span<const NamedTensor> tensors);

/// FNV-1a 64 over a byte range.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::string digest_hex(std::uint64_t digest);
std::uint64_t digest_from_hex(const std::string& hex);

/// Nearest float32 value, widened back to double.
double round_to_f32(double v);

}  // namespace latsketch::io
