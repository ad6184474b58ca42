// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/base64.hpp"
#include "latsketch/io/checkpoint.hpp"
#include "latsketch/io/netpbm.hpp"
#include "latsketch/nn/rng.hpp"

using namespace latsketch;
using namespace latsketch::io;
using nn::Tensor;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::uint32_t read_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

TEST_CASE("base64 matches the RFC 4648 test vectors") {
    const std::pair<const char*, const char*> vectors[] = {
        {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
        {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
    };
    for (const auto& [plain, coded] : vectors) {
        CHECK(base64_encode(bytes_of(plain)) == coded);
        CHECK(base64_decode(coded) == bytes_of(plain));
    }
    std::vector<std::uint8_t> all(256);
    for (int i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
    CHECK(base64_decode(base64_encode(all)) == all);
    CHECK_THROWS_AS(base64_decode("Zm9"), UsageError);
    CHECK_THROWS_AS(base64_decode("Zm=v"), UsageError);
    CHECK_THROWS_AS(base64_decode("Zm9*"), UsageError);
}

TEST_CASE("FNV-1a 64 reference values") {
    CHECK(fnv1a64(bytes_of("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(bytes_of("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(bytes_of("foobar")) == 0x85944171f73967e8ULL);
    CHECK(digest_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(digest_from_hex("af63dc4c8601ec8c") == 0xaf63dc4c8601ec8cULL);
    CHECK_THROWS_AS(digest_from_hex("xyz"), ModelError);
    CHECK_THROWS_AS(digest_from_hex("af63dc4c8601ec8g"), ModelError);
}

TEST_CASE("byte quantization rounds and clamps") {
    CHECK(to_byte(0.0) == 0);
    CHECK(to_byte(1.0) == 255);
    CHECK(to_byte(-3.0) == 0);
    CHECK(to_byte(7.0) == 255);
    CHECK(to_byte(0.5) == 128);
    CHECK(to_byte(100.4 / 255.0) == 100);
    for (int b = 0; b < 256; ++b) CHECK(to_byte(from_byte(static_cast<std::uint8_t>(b))) == b);
}

TEST_CASE("netpbm encodes the documented binary layout") {
    // 2x1 RGB: red, then (0, 128, 255).
    const Tensor img({3, 1, 2}, {1.0, 0.0, 0.0, 128.0 / 255.0, 0.0, 1.0});
    const auto enc = encode_netpbm(img);
    const std::string head = "P6\n2 1\n255\n";
    REQUIRE(enc.size() == head.size() + 6);
    CHECK(std::string(enc.begin(), enc.begin() + head.size()) == head);
    const std::uint8_t px[] = {255, 0, 0, 0, 128, 255};
    CHECK(std::memcmp(enc.data() + head.size(), px, 6) == 0);

    // Hand-written P5 with a comment line and odd whitespace.
    const std::string p5 = std::string("P5 # gray\n3  2\n255\n") + std::string("\x00\x10\xff\x01\x02\x03", 6);
    const Tensor g = decode_netpbm(bytes_of(p5));
    REQUIRE(g.shape() == nn::Shape{1, 2, 3});
    CHECK(g[1] == doctest::Approx(16.0 / 255.0));
    CHECK(g[2] == 1.0);
    CHECK(g[5] == doctest::Approx(3.0 / 255.0));

    CHECK_THROWS_AS(decode_netpbm(bytes_of("P3\n1 1\n255\n0 0 0")), DataError);
    CHECK_THROWS_AS(decode_netpbm(bytes_of("P5\n2 2\n65535\n")), DataError);
    CHECK_THROWS_AS(decode_netpbm(bytes_of("P5\n2 2\n255\n\x01")), DataError);
    CHECK_THROWS_AS(encode_netpbm(Tensor({2, 2, 2})), ShapeError);
}

TEST_CASE("netpbm files round-trip quantized images") {
    testing::TempDir dir("io");
    nn::Rng rng(3);
    Tensor img({3, 5, 4});
    for (double& v : img.data()) v = from_byte(static_cast<std::uint8_t>(rng.below(256)));
    write_ppm(dir.path() / "a.ppm", img);
    CHECK(read_netpbm(dir.path() / "a.ppm").storage() == img.storage());
    Tensor gray({1, 3, 3});
    for (double& v : gray.data()) v = from_byte(static_cast<std::uint8_t>(rng.below(256)));
    write_pgm(dir.path() / "g.pgm", gray);
    CHECK(read_netpbm(dir.path() / "g.pgm").storage() == gray.storage());
    CHECK_THROWS_AS(write_ppm(dir.path() / "x.ppm", gray), ShapeError);
    CHECK_THROWS_AS(read_netpbm(dir.path() / "missing.ppm"), DataError);
}

TEST_CASE("DSK1 container layout decodes independently") {
    Checkpoint ck;
    ck.model_kind = "unit";
    ck.metadata = {{"answer", 42}};
    ck.tensors.push_back({"a", Tensor({2, 2}, {1.0, -2.5, 0.1, 3.0})});
    ck.tensors.push_back({"b", Tensor({3}, {7.0, 8.0, 9.0})});
    const auto bytes = encode_checkpoint(ck);

    REQUIRE(bytes.size() > 8);
    CHECK(std::memcmp(bytes.data(), "DSK1", 4) == 0);
    const std::uint32_t hlen = read_u32_le(bytes.data() + 4);
    const auto header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    CHECK(header.at("format_version") == 1);
    CHECK(header.at("model_kind") == "unit");
    CHECK(header.at("metadata").at("answer") == 42);
    const auto& index = header.at("tensor_index");
    REQUIRE(index.size() == 2);
    CHECK(index[1].at("name") == "b");
    CHECK(index[1].at("dtype") == "f32");
    CHECK(index[1].at("shape") == nlohmann::json::array({3}));
    const std::size_t payload = 8 + hlen;
    CHECK(bytes.size() == payload + 7 * 4);
    const std::size_t off = index[0].at("byte_offset").get<std::size_t>();
    float f;
    std::memcpy(&f, bytes.data() + payload + off + 4, 4);
    CHECK(f == -2.5f);
    std::memcpy(&f, bytes.data() + payload + off + 8, 4);
    CHECK(f == 0.1f);

    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.model_kind == "unit");
    CHECK(back.tensor("a")[2] == round_to_f32(0.1));
    CHECK(back.tensor("b").shape() == nn::Shape{3});
    CHECK_THROWS_AS(back.tensor("c"), ModelError);
    CHECK(encode_checkpoint(back) == bytes);
}

TEST_CASE("DSK1 rejects corrupt input") {
    Checkpoint ck;
    ck.model_kind = "unit";
    ck.tensors.push_back({"a", Tensor({4}, 1.0)});
    auto bytes = encode_checkpoint(ck);
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        CHECK_THROWS_AS(decode_checkpoint(bytes), ModelError);
    }
    SUBCASE("truncated payload") {
        bytes.resize(bytes.size() - 3);
        CHECK_THROWS_AS(decode_checkpoint(bytes), ModelError);
    }
    SUBCASE("truncated header") {
        bytes.resize(12);
        CHECK_THROWS_AS(decode_checkpoint(bytes), ModelError);
    }
    SUBCASE("garbage header") {
        bytes[9] = '!';
        CHECK_THROWS_AS(decode_checkpoint(bytes), ModelError);
    }
}

TEST_CASE("f32 payload and rounding") {
    CHECK(round_to_f32(0.1) == static_cast<double>(0.1f));
    CHECK(round_to_f32(1.0) == 1.0);
    const std::vector<NamedTensor> ts = {{"x", Tensor({1}, {1.0})}, {"y", Tensor({1}, {-2.0})}};
    const auto p = f32_payload(ts);
    REQUIRE(p.size() == 8);
    CHECK(read_u32_le(p.data()) == 0x3f800000u);
    CHECK(read_u32_le(p.data() + 4) == 0xc0000000u);
}

TEST_CASE("checkpoint files round-trip and report missing files") {
    testing::TempDir dir("ckpt");
    Checkpoint ck;
    ck.model_kind = "unit";
    ck.tensors.push_back({"w", Tensor({2}, {0.25, 0.5})});
    write_checkpoint(dir.path() / "c.dsk", ck);
    CHECK(read_checkpoint(dir.path() / "c.dsk").tensor("w").storage() == ck.tensors[0].value.storage());
    CHECK_THROWS_AS(read_checkpoint(dir.path() / "none.dsk"), ModelError);
}
