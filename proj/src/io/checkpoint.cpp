// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "latsketch/error.hpp"

namespace latsketch::io {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'K', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

const nn::Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw ModelError("checkpoint (" + model_kind + ") has no tensor '" + name + "'");
}

double round_to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<std::uint8_t> f32_payload(std::span<const NamedTensor> tensors) {
    std::vector<std::uint8_t> out;
    for (const NamedTensor& t : tensors) {
        for (double v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string digest_hex(std::uint64_t digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = kHex[digest & 0xF];
        digest >>= 4;
    }
    return s;
}

std::uint64_t digest_from_hex(const std::string& hex) {
    if (hex.size() != 16) throw ModelError("malformed digest '" + hex + "'");
    std::uint64_t v = 0;
    for (char c : hex) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw ModelError("malformed digest '" + hex + "'");
    }
    return v;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json index = nlohmann::json::array();
    std::size_t offset = 0;
    for (const NamedTensor& t : ckpt.tensors) {
        index.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"dtype", "f32"}, {"byte_offset", offset}});
        offset += t.value.size() * 4;
    }
    const nlohmann::json header = {{"format_version", kFormatVersion},
                                   {"model_kind", ckpt.model_kind},
                                   {"tensor_index", index},
                                   {"metadata", ckpt.metadata}};
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    const auto payload = f32_payload(ckpt.tensors);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ModelError("not a DSK1 checkpoint");
    const std::uint32_t header_len = get_u32(bytes.data() + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(header_len)) throw ModelError("truncated DSK1 header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed DSK1 header: ") + e.what());
    }
    if (header.value("format_version", 0u) != kFormatVersion) throw ModelError("unsupported DSK1 format_version");

    const std::uint8_t* payload = bytes.data() + 8 + header_len;
    const std::size_t payload_len = bytes.size() - 8 - header_len;
    Checkpoint ckpt;
    ckpt.model_kind = header.at("model_kind").get<std::string>();
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
    for (const auto& entry : header.at("tensor_index")) {
        if (entry.at("dtype").get<std::string>() != "f32") throw ModelError("unsupported tensor dtype");
        nn::Shape shape = entry.at("shape").get<nn::Shape>();
        const std::size_t offset = entry.at("byte_offset").get<std::size_t>();
        const std::size_t count = nn::shape_numel(shape);
        if (offset + count * 4 > payload_len) throw ModelError("tensor '" + entry.at("name").get<std::string>() +
                                                               "' runs past the payload");
        std::vector<double> data(count);
        for (std::size_t i = 0; i < count; ++i) {
            data[i] = static_cast<double>(std::bit_cast<float>(get_u32(payload + offset + 4 * i)));
        }
        ckpt.tensors.push_back({entry.at("name").get<std::string>(), nn::Tensor(std::move(shape), std::move(data))});
    }
    return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace latsketch::io
