// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <thread>

#include "fixtures.hpp"
#include "latsketch/diffusion/schedule.hpp"
#include "latsketch/error.hpp"
#include "latsketch/pipeline/pipeline.hpp"

using namespace latsketch;
using namespace latsketch::pipeline;
using nn::Tensor;

namespace {

const Translator& translator() {
    static const Translator tr(testing::quick_backbone(), testing::quick_lctn());
    return tr;
}

const Tensor& sketch_of(std::size_t id) { return testing::small_dataset().items.at(id).edges; }

// Reverse chain recomputed from the public pieces, in the documented draw order.
Tensor reference_chain(const backbone::BackboneBundle& b, const Tensor& z0, const SampleConfig& cfg) {
    const auto& sched = b.schedule();
    const std::size_t T = sched.steps();
    const std::size_t k = k_from_ratio(cfg.k_ratio, T);
    nn::Rng noise = nn::Rng(cfg.seed).substream("noise");
    Tensor z = diffusion::q_sample(z0, k, nn::randn(z0.shape(), noise), sched);
    const Tensor cond = b.embed_condition(cfg.class_id, cfg.style_id);
    for (std::size_t t = cfg.step_mode == StepMode::aligned ? k : T; t >= 1; --t) {
        const Tensor eps = b.denoise_eps(z, t, cond, false).eps;
        if (t > 1) {
            const Tensor draw = nn::randn(z.shape(), noise);
            z = diffusion::p_step(z, t, eps, &draw, sched);
        } else {
            z = diffusion::p_step(z, t, eps, nullptr, sched);
        }
    }
    return b.decode_latent(z);
}

}  // namespace

TEST_CASE("k_from_ratio rounds and keeps 1 <= k < T") {
    CHECK(k_from_ratio(0.8, 100) == 80);
    CHECK(k_from_ratio(0.5, 100) == 50);
    CHECK(k_from_ratio(0.804, 100) == 80);
    CHECK(k_from_ratio(0.806, 100) == 81);
    CHECK(k_from_ratio(0.999, 100) == 99);
    CHECK(k_from_ratio(0.001, 100) == 1);
    CHECK(k_from_ratio(0.9, 1000) == 900);
    CHECK(k_from_ratio(0.99, 2) == 1);
    for (std::size_t T : {2u, 3u, 10u, 100u, 1000u})
        for (double r = 0.01; r < 1.0; r += 0.01) {
            const std::size_t k = k_from_ratio(r, T);
            CHECK(k >= 1);
            CHECK(k < T);
        }
    CHECK(kDefaultKRatio == 0.8);
    for (double bad : {0.0, 1.0, -0.5, 1.5, std::numeric_limits<double>::quiet_NaN()})
        CHECK_THROWS_AS(k_from_ratio(bad, 100), UsageError);
    CHECK_THROWS_AS(k_from_ratio(0.5, 1), UsageError);
}

TEST_CASE("step mode names round-trip") {
    CHECK(to_string(StepMode::aligned) == "aligned");
    CHECK(to_string(StepMode::paper_literal) == "paper-literal");
    CHECK(step_mode_from_string("aligned") == StepMode::aligned);
    CHECK(step_mode_from_string("paper-literal") == StepMode::paper_literal);
    CHECK_THROWS_AS(step_mode_from_string("literal"), UsageError);
}

TEST_CASE("translator refuses unfrozen or mismatched backbones") {
    const auto& ds = testing::small_dataset();
    backbone::BackboneBundle unfrozen(testing::small_backbone_config(ds), 1);
    CHECK_THROWS_AS(Translator(unfrozen, testing::quick_lctn()), ModelError);
    const auto other = testing::make_quick_backbone(2);
    REQUIRE(other->content_digest() != testing::quick_backbone().content_digest());
    CHECK_THROWS_AS(Translator(*other, testing::quick_lctn()), ModelError);
}

TEST_CASE("translate is bit-reproducible and matches an independently stepped chain") {
    const auto& tr = translator();
    SampleConfig cfg;
    cfg.seed = 1234;
    cfg.class_id = 3;
    cfg.k_ratio = 0.3;
    const TranslationResult a = tr.translate(sketch_of(30), cfg);
    const TranslationResult b = tr.translate(sketch_of(30), cfg);
    CHECK(a.image.storage() == b.image.storage());
    CHECK(a.z0_digest == b.z0_digest);
    CHECK(a.zk_digest == b.zk_digest);
    CHECK(a.k_used == 30);
    CHECK(a.image.shape() == nn::Shape{3, 32, 32});
    for (double v : a.image.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    const Tensor z0 = tr.latent_z0(sketch_of(30), 3);
    CHECK(a.z0_digest == tensor_digest(z0));
    CHECK(reference_chain(testing::quick_backbone(), z0, cfg).storage() == a.image.storage());

    SampleConfig literal = cfg;
    literal.step_mode = StepMode::paper_literal;
    const TranslationResult l = tr.translate(sketch_of(30), literal);
    CHECK(reference_chain(testing::quick_backbone(), z0, literal).storage() == l.image.storage());
    CHECK(l.zk_digest == a.zk_digest);
    CHECK(l.image.storage() != a.image.storage());
}

TEST_CASE("only the perturb and reverse stages depend on seed and k") {
    const auto& tr = translator();
    SampleConfig cfg;
    cfg.class_id = 1;
    const TranslationResult base = tr.translate(sketch_of(12), cfg);
    SampleConfig other_seed = cfg;
    other_seed.seed = 99;
    SampleConfig other_k = cfg;
    other_k.k_ratio = 0.5;
    const TranslationResult s = tr.translate(sketch_of(12), other_seed);
    const TranslationResult k = tr.translate(sketch_of(12), other_k);
    CHECK(s.z0_digest == base.z0_digest);
    CHECK(k.z0_digest == base.z0_digest);
    CHECK(s.zk_digest != base.zk_digest);
    CHECK(k.zk_digest != base.zk_digest);
    CHECK(s.image.storage() != base.image.storage());

    SampleConfig other_class = cfg;
    other_class.class_id = 5;
    CHECK(tr.translate(sketch_of(12), other_class).z0_digest != base.z0_digest);
}

TEST_CASE("direct decode consumes no randomness and shares the z0 prefix") {
    const auto& tr = translator();
    SampleConfig cfg;
    cfg.seed = 7;
    cfg.class_id = 2;
    cfg.return_direct_decode = true;
    const TranslationResult with = tr.translate(sketch_of(25), cfg);
    cfg.return_direct_decode = false;
    const TranslationResult without = tr.translate(sketch_of(25), cfg);
    REQUIRE(with.direct);
    CHECK_FALSE(without.direct);
    CHECK(with.image.storage() == without.image.storage());

    const Tensor d = tr.direct_decode(sketch_of(25), 2);
    CHECK(d.storage() == with.direct->storage());
    CHECK(d.storage() == tr.direct_decode(sketch_of(25), 2).storage());
    CHECK(d.storage() == testing::quick_backbone().decode_latent(tr.latent_z0(sketch_of(25), 2)).storage());
}

TEST_CASE("style conditioning: none reduces to translate, a style changes only the reverse chain") {
    const auto& tr = translator();
    SampleConfig cfg;
    cfg.seed = 5;
    cfg.class_id = 4;
    const TranslationResult plain = tr.translate(sketch_of(41), cfg);
    SampleConfig explicit_none = cfg;
    explicit_none.style_id = std::nullopt;
    CHECK(tr.translate(sketch_of(41), explicit_none).image.storage() == plain.image.storage());

    const TranslationResult night = tr.translate_styled(sketch_of(41), 4, 1, cfg);
    SampleConfig styled = cfg;
    styled.style_id = 1;
    CHECK(tr.translate(sketch_of(41), styled).image.storage() == night.image.storage());
    CHECK(night.z0_digest == plain.z0_digest);
    CHECK(night.zk_digest == plain.zk_digest);
    CHECK(night.image.storage() != plain.image.storage());
    CHECK_THROWS_AS(tr.translate_styled(sketch_of(41), 4, 2, cfg), UsageError);
}

TEST_CASE("sketch shapes and invalid requests") {
    const auto& tr = translator();
    SampleConfig cfg;
    const Tensor flat = sketch_of(3).reshaped({32, 32});
    CHECK(tr.translate(flat, cfg).image.storage() == tr.translate(sketch_of(3), cfg).image.storage());
    CHECK_THROWS_AS(tr.translate(Tensor({1, 16, 16}), cfg), ShapeError);
    CHECK_THROWS_AS(tr.translate(Tensor({3, 32, 32}), cfg), ShapeError);
    SampleConfig bad_class = cfg;
    bad_class.class_id = 8;
    CHECK_THROWS_AS(tr.translate(sketch_of(3), bad_class), UsageError);
    SampleConfig bad_k = cfg;
    bad_k.k_ratio = 1.0;
    CHECK_THROWS_AS(tr.translate(sketch_of(3), bad_k), UsageError);
}

TEST_CASE("concurrent translations equal sequential ones") {
    const auto& tr = translator();
    std::vector<Tensor> expected, got(4);
    for (std::size_t i = 0; i < 4; ++i) {
        SampleConfig cfg;
        cfg.seed = 100 + i;
        cfg.class_id = i;
        expected.push_back(tr.translate(sketch_of(i * 10), cfg).image);
    }
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < 4; ++i)
        threads.emplace_back([&, i] {
            SampleConfig cfg;
            cfg.seed = 100 + i;
            cfg.class_id = i;
            got[i] = tr.translate(sketch_of(i * 10), cfg).image;
        });
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i].storage() == expected[i].storage());
}

TEST_CASE("stage timings are recorded and non-negative") {
    const TranslationResult r = translator().translate(sketch_of(0), {});
    for (double ms : {r.timings.encode, r.timings.features, r.timings.lctn, r.timings.perturb, r.timings.denoise,
                      r.timings.decode})
        CHECK(ms >= 0.0);
    CHECK(r.timings.denoise > 0.0);
}

TEST_CASE("tensor digest depends on every bit") {
    Tensor t({4}, 0.5);
    const std::string d = tensor_digest(t);
    CHECK(d.size() == 16);
    t[3] = std::nextafter(0.5, 1.0);
    CHECK(tensor_digest(t) != d);
}
