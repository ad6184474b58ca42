// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/service/service.hpp"

#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/base64.hpp"
#include "latsketch/io/netpbm.hpp"

namespace latsketch::service {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::size_t kMaxEdgeSide = 512;

/// Invalid request; `field` names the offending member.
struct BadRequest {
    std::string field;
    std::string message;
};

Response json_response(int status, const Json& body) { return {status, body.dump()}; }

Response bad_request(const BadRequest& e) {
    return json_response(400, Json{{"error", e.message}, {"field", e.field}});
}

Response not_loaded() { return json_response(503, Json{{"error", "model not loaded"}}); }

Response internal_error(const std::exception& e) {
    static std::atomic<std::uint64_t> counter{0};
    const std::string id = io::digest_hex(nn::splitmix64(++counter ^ 0x5EEDULL));
    std::fprintf(stderr, "internal error %s: %s\n", id.c_str(), e.what());
    return json_response(500, Json{{"error", "internal error"}, {"id", id}});
}

nlohmann::json parse_body(const std::string& body) {
    try {
        nlohmann::json j = nlohmann::json::parse(body);
        if (!j.is_object()) throw BadRequest{"body", "request body must be a JSON object"};
        return j;
    } catch (const nlohmann::json::parse_error&) {
        throw BadRequest{"body", "request body is not valid JSON"};
    }
}

std::size_t require_uint(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw BadRequest{field, std::string("missing field '") + field + "'"};
    const auto& v = j[field];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw BadRequest{field, std::string("'") + field + "' must be a non-negative integer"};
    return v.get<std::size_t>();
}

std::vector<std::uint8_t> require_base64(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string())
        throw BadRequest{field, std::string("'") + field + "' must be a base64 string"};
    try {
        return io::base64_decode(j[field].get<std::string>());
    } catch (const UsageError&) {
        throw BadRequest{field, std::string("'") + field + "' is not valid base64"};
    }
}

std::string encode_image(const nn::Tensor& chw) { return io::base64_encode(io::to_bytes(chw)); }

}  // namespace

Service::Service(std::uint64_t server_seed) : server_seed_(server_seed) {}
Service::~Service() = default;

void Service::load(std::unique_ptr<backbone::BackboneBundle> bundle, std::unique_ptr<lctn::LctnModel> lctn) {
    if (!bundle || !lctn) throw UsageError("service load needs both models");
    auto translator = std::make_unique<pipeline::Translator>(*bundle, *lctn);
    bundle_ = std::move(bundle);
    lctn_ = std::move(lctn);
    translator_ = std::move(translator);
    digest_at_load_ = bundle_->compute_digest();
}

void Service::verify_unchanged() const {
    if (!bundle_) return;
    const std::string now = bundle_->compute_digest();
    if (now != digest_at_load_)
        throw ModelError("backbone changed while serving: " + digest_at_load_ + " -> " + now);
}

Response Service::health() const {
    return json_response(200, Json{{"status", "ok"}, {"model_loaded", loaded()}});
}

Response Service::meta() const {
    if (!loaded()) return not_loaded();
    const auto& cfg = bundle_->config();
    Json classes = Json::array(), styles = Json::array();
    for (std::size_t i = 0; i < cfg.class_names.size(); ++i) classes.push_back({{"id", i}, {"name", cfg.class_names[i]}});
    for (std::size_t i = 0; i < cfg.style_names.size(); ++i) styles.push_back({{"id", i}, {"name", cfg.style_names[i]}});
    return json_response(200, Json{{"classes", classes},
                                   {"styles", styles},
                                   {"image_size", bundle_->image_size()},
                                   {"latent_size", bundle_->latent_size()},
                                   {"T", bundle_->schedule().steps()},
                                   {"k_default", pipeline::kDefaultKRatio},
                                   {"step_modes", {"aligned", "paper-literal"}}});
}

Response Service::sample(const std::string& body) {
    if (!loaded()) return not_loaded();
    try {
        const nlohmann::json j = parse_body(body);
        const std::size_t size = bundle_->image_size();
        const std::size_t width = require_uint(j, "width");
        if (width != size) throw BadRequest{"width", "width must be " + std::to_string(size)};
        const std::size_t height = require_uint(j, "height");
        if (height != size) throw BadRequest{"height", "height must be " + std::to_string(size)};
        const auto bytes = require_base64(j, "sketch");
        if (bytes.size() != width * height)
            throw BadRequest{"sketch", "sketch must decode to " + std::to_string(width * height) + " bytes"};

        pipeline::SampleConfig cfg;
        cfg.class_id = require_uint(j, "class_id");
        if (cfg.class_id >= bundle_->config().class_names.size()) throw BadRequest{"class_id", "class_id out of range"};
        if (j.contains("style_id") && !j["style_id"].is_null()) {
            cfg.style_id = require_uint(j, "style_id");
            if (*cfg.style_id >= bundle_->config().style_names.size())
                throw BadRequest{"style_id", "style_id out of range"};
        }
        if (j.contains("k_ratio")) {
            const auto& k = j["k_ratio"];
            if (!k.is_number() || !(k.get<double>() > 0.0 && k.get<double>() < 1.0))
                throw BadRequest{"k_ratio", "k_ratio must be a number in (0, 1)"};
            cfg.k_ratio = k.get<double>();
        }
        if (j.contains("seed") && !j["seed"].is_null()) {
            if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
                throw BadRequest{"seed", "seed must be a non-negative integer or null"};
            cfg.seed = j["seed"].get<std::uint64_t>();
        } else {
            nn::Rng r = nn::Rng(server_seed_).substream("request").substream(request_counter_.fetch_add(1));
            cfg.seed = r.next_u64() >> 11;
        }
        if (j.contains("step_mode")) {
            if (!j["step_mode"].is_string()) throw BadRequest{"step_mode", "step_mode must be a string"};
            try {
                cfg.step_mode = pipeline::step_mode_from_string(j["step_mode"].get<std::string>());
            } catch (const UsageError& e) {
                throw BadRequest{"step_mode", e.what()};
            }
        }
        if (j.contains("include_direct")) {
            if (!j["include_direct"].is_boolean()) throw BadRequest{"include_direct", "include_direct must be a boolean"};
            cfg.return_direct_decode = j["include_direct"].get<bool>();
        }

        nn::Tensor sketch({1, height, width});
        for (std::size_t i = 0; i < bytes.size(); ++i) sketch[i] = bytes[i] != 0 ? 1.0 : 0.0;
        const pipeline::TranslationResult res = translator_->translate(sketch, cfg);
        const auto& t = res.timings;
        return json_response(
            200, Json{{"image", encode_image(res.image)},
                      {"width", width},
                      {"height", height},
                      {"direct_image", res.direct ? Json(encode_image(*res.direct)) : Json(nullptr)},
                      {"seed_used", cfg.seed},
                      {"k_used", res.k_used},
                      {"timings_ms",
                       {{"encode", t.encode}, {"features", t.features}, {"lctn", t.lctn}, {"perturb", t.perturb},
                        {"denoise", t.denoise}, {"decode", t.decode}}}});
    } catch (const BadRequest& e) {
        return bad_request(e);
    } catch (const std::exception& e) {
        return internal_error(e);
    }
}

Response Service::edge(const std::string& body) const {
    try {
        const nlohmann::json j = parse_body(body);
        const std::size_t width = require_uint(j, "width");
        if (width == 0 || width > kMaxEdgeSide)
            throw BadRequest{"width", "width must lie in [1, " + std::to_string(kMaxEdgeSide) + "]"};
        const std::size_t height = require_uint(j, "height");
        if (height == 0 || height > kMaxEdgeSide)
            throw BadRequest{"height", "height must lie in [1, " + std::to_string(kMaxEdgeSide) + "]"};
        const auto bytes = require_base64(j, "image");
        if (bytes.size() != 3 * width * height)
            throw BadRequest{"image", "image must decode to " + std::to_string(3 * width * height) + " bytes"};
        const nn::Tensor edges = datagen::edge_map(io::from_bytes(bytes, 3, height, width));
        return json_response(200, Json{{"edges", encode_image(edges)}, {"width", width}, {"height", height}});
    } catch (const BadRequest& e) {
        return bad_request(e);
    } catch (const std::exception& e) {
        return internal_error(e);
    }
}

void register_routes(httplib::Server& server, Service& service) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    auto not_allowed = [](const char* allow) {
        return [allow](const httplib::Request&, httplib::Response& res) {
            res.status = 405;
            res.set_header("Allow", allow);
            res.set_content(R"({"error":"method not allowed"})", "application/json");
        };
    };
    server.Get("/api/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.health());
    });
    server.Get("/api/meta", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.meta());
    });
    server.Post("/api/sample", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.sample(req.body));
    });
    server.Post("/api/edge", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.edge(req.body));
    });
    for (const char* path : {"/api/health", "/api/meta"}) {
        server.Post(path, not_allowed("GET"));
        server.Put(path, not_allowed("GET"));
        server.Delete(path, not_allowed("GET"));
    }
    for (const char* path : {"/api/sample", "/api/edge"}) {
        server.Get(path, not_allowed("POST"));
        server.Put(path, not_allowed("POST"));
        server.Delete(path, not_allowed("POST"));
    }
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

}  // namespace latsketch::service
