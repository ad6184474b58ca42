// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "latsketch/io/base64.hpp"
#include "latsketch/io/netpbm.hpp"
#include "latsketch/service/service.hpp"

using namespace latsketch;
using nlohmann::json;

namespace {

std::unique_ptr<service::Service> loaded_service(std::uint64_t server_seed = 0) {
    auto svc = std::make_unique<service::Service>(server_seed);
    auto bundle = testing::make_quick_backbone();
    auto lctn = lctn::LctnModel::from_checkpoint(testing::quick_lctn().to_checkpoint(), *bundle);
    svc->load(std::move(bundle), std::move(lctn));
    return svc;
}

service::Service& shared_service() {
    static const std::unique_ptr<service::Service> svc = loaded_service();
    return *svc;
}

std::string sketch_b64(std::size_t id, std::uint8_t on = 255) {
    std::vector<std::uint8_t> bytes;
    for (double v : testing::small_dataset().items.at(id).edges.data()) bytes.push_back(v > 0.5 ? on : 0);
    return io::base64_encode(bytes);
}

json sample_request(std::size_t id = 0) {
    return json{{"sketch", sketch_b64(id)}, {"width", 32},    {"height", 32},
                {"class_id", 1},            {"style_id", nullptr}, {"k_ratio", 0.8},
                {"seed", 42},               {"step_mode", "aligned"}, {"include_direct", false}};
}

json body_of(const service::Response& r) { return json::parse(r.body); }

// Status and offending field of a request with one member replaced or removed.
std::pair<int, std::string> try_sample(const std::function<void(json&)>& edit) {
    json req = sample_request();
    edit(req);
    const auto r = shared_service().sample(req.dump());
    const json b = body_of(r);
    return {r.status, b.value("field", std::string())};
}

}  // namespace

TEST_CASE("health and meta before and after loading") {
    service::Service empty;
    CHECK(empty.health().status == 200);
    CHECK(empty.health().body == R"({"status":"ok","model_loaded":false})");
    CHECK(empty.meta().status == 503);
    CHECK(empty.sample(sample_request().dump()).status == 503);

    auto& svc = shared_service();
    CHECK(svc.health().body == R"({"status":"ok","model_loaded":true})");
    const auto m = svc.meta();
    REQUIRE(m.status == 200);
    const json meta = body_of(m);
    std::vector<std::string> keys;
    for (auto it = meta.begin(); it != meta.end(); ++it) keys.push_back(it.key());
    // The parsed object sorts keys, so wire order is checked on the raw body.
    CHECK(m.body.find(R"({"classes":)") == 0);
    CHECK(m.body.find(R"("styles":)") < m.body.find(R"("image_size":)"));
    CHECK(m.body.find(R"("T":)") < m.body.find(R"("k_default":)"));
    CHECK(meta["classes"].size() == 8);
    CHECK(meta["classes"][3]["name"] == testing::small_dataset().class_names[3]);
    CHECK(meta["styles"][1]["name"] == "night");
    CHECK(meta["T"] == testing::quick_backbone().schedule().steps());
    CHECK(meta["k_default"] == 0.8);
    CHECK(meta["image_size"] == 32);
    CHECK(meta["latent_size"] == 8);
    CHECK(meta["step_modes"] == json::array({"aligned", "paper-literal"}));
    CHECK(svc.meta().body == m.body);
    CHECK(keys.size() == 7);
}

TEST_CASE("seeded samples are byte-identical and match the pipeline") {
    auto& svc = shared_service();
    const auto a = svc.sample(sample_request(20).dump());
    const auto b = svc.sample(sample_request(20).dump());
    REQUIRE(a.status == 200);
    const json ja = body_of(a), jb = body_of(b);
    CHECK(ja["image"] == jb["image"]);
    CHECK(ja["seed_used"] == 42);
    CHECK(ja["k_used"] == 80);
    CHECK(ja["width"] == 32);
    CHECK(ja["direct_image"].is_null());
    CHECK(io::base64_decode(ja["image"].get<std::string>()).size() == 3 * 32 * 32);
    for (const char* stage : {"encode", "features", "lctn", "perturb", "denoise", "decode"})
        CHECK(ja["timings_ms"][stage].get<double>() >= 0.0);

    const pipeline::Translator tr(testing::quick_backbone(), testing::quick_lctn());
    pipeline::SampleConfig cfg;
    cfg.seed = 42;
    cfg.class_id = 1;
    const auto res = tr.translate(testing::small_dataset().items[20].edges, cfg);
    CHECK(io::base64_decode(ja["image"].get<std::string>()) == io::to_bytes(res.image));

    // 0/1 and 0/255 sketch encodings are the same strokes.
    json ones = sample_request(20);
    ones["sketch"] = sketch_b64(20, 1);
    CHECK(body_of(svc.sample(ones.dump()))["image"] == ja["image"]);
}

TEST_CASE("direct image, style and step mode are honoured") {
    auto& svc = shared_service();
    json req = sample_request(5);
    req["include_direct"] = true;
    const json with = body_of(svc.sample(req.dump()));
    REQUIRE(with["direct_image"].is_string());
    CHECK(io::base64_decode(with["direct_image"].get<std::string>()).size() == 3 * 32 * 32);
    CHECK(with["image"] == body_of(svc.sample(sample_request(5).dump()))["image"]);

    json styled = sample_request(5);
    styled["style_id"] = 1;
    CHECK(body_of(svc.sample(styled.dump()))["image"] != with["image"]);
    json literal = sample_request(5);
    literal["step_mode"] = "paper-literal";
    CHECK(body_of(svc.sample(literal.dump()))["image"] != with["image"]);

    json high = sample_request(5);
    high["k_ratio"] = 0.99;
    const auto r = svc.sample(high.dump());
    CHECK(r.status == 200);
    CHECK(body_of(r)["k_used"] == 99);
}

TEST_CASE("null seeds are drawn per request, reported, and replayable") {
    auto svc = loaded_service(77);
    json req = sample_request(9);
    req["seed"] = nullptr;
    const json first = body_of(svc->sample(req.dump()));
    const json second = body_of(svc->sample(req.dump()));
    const auto s1 = first["seed_used"].get<std::uint64_t>();
    CHECK(s1 != second["seed_used"].get<std::uint64_t>());
    CHECK(s1 < (std::uint64_t{1} << 53));
    req["seed"] = s1;
    CHECK(body_of(svc->sample(req.dump()))["image"] == first["image"]);
    json no_seed = sample_request(9);
    no_seed.erase("seed");
    CHECK(svc->sample(no_seed.dump()).status == 200);

    // A fresh server with the same seed draws the same sequence.
    auto again = loaded_service(77);
    req["seed"] = nullptr;
    CHECK(body_of(again->sample(req.dump()))["seed_used"] == first["seed_used"]);
}

TEST_CASE("invalid sample requests are rejected with 400 naming the field") {
    CHECK(try_sample([](json& j) { j["width"] = 33; }) == std::pair<int, std::string>{400, "width"});
    CHECK(try_sample([](json& j) { j["height"] = 16; }) == std::pair<int, std::string>{400, "height"});
    CHECK(try_sample([](json& j) { j.erase("width"); }) == std::pair<int, std::string>{400, "width"});
    CHECK(try_sample([](json& j) { j["sketch"] = "@@@"; }) == std::pair<int, std::string>{400, "sketch"});
    CHECK(try_sample([](json& j) { j["sketch"] = io::base64_encode(std::vector<std::uint8_t>(31 * 32)); }) ==
          std::pair<int, std::string>{400, "sketch"});
    CHECK(try_sample([](json& j) { j["class_id"] = 8; }) == std::pair<int, std::string>{400, "class_id"});
    CHECK(try_sample([](json& j) { j["class_id"] = -1; }) == std::pair<int, std::string>{400, "class_id"});
    CHECK(try_sample([](json& j) { j["class_id"] = "orange"; }) == std::pair<int, std::string>{400, "class_id"});
    CHECK(try_sample([](json& j) { j["style_id"] = 2; }) == std::pair<int, std::string>{400, "style_id"});
    CHECK(try_sample([](json& j) { j["k_ratio"] = 1.0; }) == std::pair<int, std::string>{400, "k_ratio"});
    CHECK(try_sample([](json& j) { j["k_ratio"] = 0; }) == std::pair<int, std::string>{400, "k_ratio"});
    CHECK(try_sample([](json& j) { j["k_ratio"] = "0.5"; }) == std::pair<int, std::string>{400, "k_ratio"});
    CHECK(try_sample([](json& j) { j["seed"] = -3; }) == std::pair<int, std::string>{400, "seed"});
    CHECK(try_sample([](json& j) { j["seed"] = 1.5; }) == std::pair<int, std::string>{400, "seed"});
    CHECK(try_sample([](json& j) { j["step_mode"] = "fast"; }) == std::pair<int, std::string>{400, "step_mode"});
    CHECK(try_sample([](json& j) { j["include_direct"] = 1; }) == std::pair<int, std::string>{400, "include_direct"});

    auto& svc = shared_service();
    CHECK(svc.sample("{not json").status == 400);
    CHECK(body_of(svc.sample("[1,2]"))["field"] == "body");
}

TEST_CASE("edge endpoint matches edge_map and validates input") {
    auto& svc = shared_service();
    const auto& item = testing::small_dataset().items[17];
    const json req{{"image", io::base64_encode(io::to_bytes(item.image))}, {"width", 32}, {"height", 32}};
    const auto r = svc.edge(req.dump());
    REQUIRE(r.status == 200);
    CHECK(io::base64_decode(body_of(r)["edges"].get<std::string>()) == io::to_bytes(item.edges));

    const std::vector<std::uint8_t> grey(3 * 20 * 12, 128);
    const json flat{{"image", io::base64_encode(grey)}, {"width", 12}, {"height", 20}};
    const auto fr = body_of(svc.edge(flat.dump()));
    CHECK(io::base64_decode(fr["edges"].get<std::string>()) == std::vector<std::uint8_t>(20 * 12, 0));

    service::Service empty;
    CHECK(empty.edge(req.dump()).status == 200);

    json bad = req;
    bad["image"] = "!!";
    CHECK(body_of(svc.edge(bad.dump()))["field"] == "image");
    bad = req;
    bad["width"] = 31;
    CHECK(body_of(svc.edge(bad.dump()))["field"] == "image");
    bad["width"] = 0;
    CHECK(body_of(svc.edge(bad.dump()))["field"] == "width");
    bad = req;
    bad["height"] = 100000;
    CHECK(svc.edge(bad.dump()).status == 400);
}

TEST_CASE("concurrent identical requests get identical responses") {
    auto& svc = shared_service();
    const std::string req = sample_request(33).dump();
    const std::string expected = body_of(svc.sample(req))["image"];
    std::vector<std::string> got(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < 4; ++i)
        threads.emplace_back([&, i] { got[i] = body_of(svc.sample(req))["image"]; });
    for (auto& t : threads) t.join();
    for (const auto& g : got) CHECK(g == expected);
    CHECK_NOTHROW(svc.verify_unchanged());
}

TEST_CASE("serving leaves the backbone digest unchanged") {
    auto svc = loaded_service();
    const std::string before = svc->loaded_digest();
    for (std::size_t i = 0; i < 3; ++i) svc->sample(sample_request(i * 10).dump());
    CHECK_NOTHROW(svc->verify_unchanged());
    CHECK(svc->loaded_digest() == before);
    CHECK(before == testing::quick_backbone().content_digest());
}

TEST_CASE("HTTP routes: status codes, CORS and a sample round-trip") {
    auto& svc = shared_service();
    httplib::Server server;
    service::register_routes(server, svc);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);
    auto health = client.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(health->body)["model_loaded"] == true);

    auto post_health = client.Post("/api/health", "{}", "application/json");
    REQUIRE(post_health);
    CHECK(post_health->status == 405);
    auto get_sample = client.Get("/api/sample");
    REQUIRE(get_sample);
    CHECK(get_sample->status == 405);
    auto options = client.Options("/api/sample");
    REQUIRE(options);
    CHECK(options->status == 204);

    auto sample = client.Post("/api/sample", sample_request(20).dump(), "application/json");
    REQUIRE(sample);
    CHECK(sample->status == 200);
    CHECK(json::parse(sample->body)["image"] == body_of(svc.sample(sample_request(20).dump()))["image"]);

    json bad = sample_request(20);
    bad["width"] = 33;
    auto rejected = client.Post("/api/sample", bad.dump(), "application/json");
    REQUIRE(rejected);
    CHECK(rejected->status == 400);
    CHECK(json::parse(rejected->body)["field"] == "width");

    auto meta = client.Get("/api/meta");
    REQUIRE(meta);
    CHECK(meta->body == svc.meta().body);

    server.stop();
    loop.join();
}
