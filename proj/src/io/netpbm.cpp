// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/io/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "latsketch/error.hpp"

namespace latsketch::io {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double from_byte(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

std::vector<std::uint8_t> to_bytes(const nn::Tensor& chw) {
    if (chw.rank() != 3) throw ShapeError("image must be [C, H, W], got " + nn::shape_str(chw.shape()));
    const std::size_t c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
    std::vector<std::uint8_t> out(c * hw);
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < c; ++k) out[p * c + k] = to_byte(chw[k * hw + p]);
    return out;
}

nn::Tensor from_bytes(std::span<const std::uint8_t> bytes, std::size_t channels, std::size_t height,
                      std::size_t width) {
    const std::size_t hw = height * width;
    if (bytes.size() != channels * hw) {
        throw DataError("expected " + std::to_string(channels * hw) + " bytes, got " + std::to_string(bytes.size()));
    }
    nn::Tensor t({channels, height, width});
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < channels; ++k) t[k * hw + p] = from_byte(bytes[p * channels + k]);
    return t;
}

std::vector<std::uint8_t> encode_netpbm(const nn::Tensor& chw) {
    if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3)) {
        throw ShapeError("netpbm image must be [1|3, H, W], got " + nn::shape_str(chw.shape()));
    }
    const std::string header = std::string(chw.dim(0) == 1 ? "P5" : "P6") + "\n" + std::to_string(chw.dim(2)) + " " +
                               std::to_string(chw.dim(1)) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto px = to_bytes(chw);
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

nn::Tensor decode_netpbm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        std::size_t v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start) throw DataError("malformed netpbm header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw DataError("only binary P5/P6 netpbm files are supported");
    }
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    pos = 2;
    const std::size_t width = read_int();
    const std::size_t height = read_int();
    const std::size_t maxval = read_int();
    if (maxval != 255) throw DataError("only 8-bit netpbm (maxval 255) is supported");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DataError("malformed netpbm header");
    ++pos;
    const std::size_t need = channels * width * height;
    if (bytes.size() - pos < need) throw DataError("truncated netpbm pixel data");
    return from_bytes(bytes.subspan(pos, need), channels, height, width);
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const nn::Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("PPM needs [3, H, W], got " + nn::shape_str(rgb.shape()));
    write_bytes(path, encode_netpbm(rgb));
}

void write_pgm(const std::filesystem::path& path, const nn::Tensor& gray) {
    if (gray.rank() != 3 || gray.dim(0) != 1) {
        throw ShapeError("PGM needs [1, H, W], got " + nn::shape_str(gray.shape()));
    }
    write_bytes(path, encode_netpbm(gray));
}

nn::Tensor read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_netpbm(bytes);
}

}  // namespace latsketch::io
