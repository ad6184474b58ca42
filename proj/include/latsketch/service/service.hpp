// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "latsketch/backbone/bundle.hpp"
#include "latsketch/lctn/lctn.hpp"
#include "latsketch/pipeline/pipeline.hpp"

namespace httplib {
class Server;
}

namespace latsketch::service {

struct Response {
    int status = 200;
    std::string body;
};

/// JSON request handlers over an immutable model snapshot.
///
/// Handlers are callable without a socket (tests drive them directly) and
/// are safe to run concurrently once `load` has returned. A request with a
/// null seed gets one drawn from a per-request substream of the server
/// seed; drawn seeds are limited to 53 bits so JSON clients can echo them
/// back exactly. Sketch bytes are binary: any nonzero byte is a stroke.
class Service {
public:
    explicit Service(std::uint64_t server_seed = 0);
    ~Service();

    /// Takes ownership; verifies that the LCTN matches the backbone.
    void load(std::unique_ptr<backbone::BackboneBundle> bundle, std::unique_ptr<lctn::LctnModel> lctn);
    bool loaded() const noexcept { return translator_ != nullptr; }

    Response health() const;
    Response meta() const;
    Response sample(const std::string& body);
    Response edge(const std::string& body) const;

    /// Throws ModelError if the backbone parameters changed since load.
    void verify_unchanged() const;
    const std::string& loaded_digest() const noexcept { return digest_at_load_; }

private:
    std::uint64_t server_seed_;
    std::atomic<std::uint64_t> request_counter_{0};
    std::unique_ptr<backbone::BackboneBundle> bundle_;
    std::unique_ptr<lctn::LctnModel> lctn_;
    std::unique_ptr<pipeline::Translator> translator_;
    std::string digest_at_load_;
};

/// Routes /api/health, /api/meta, /api/sample and /api/edge onto `server`
/// with permissive CORS; other methods on those paths answer 405.
void register_routes(httplib::Server& server, Service& service);

}  // namespace latsketch::service
