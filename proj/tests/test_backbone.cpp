// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/checkpoint.hpp"
#include "latsketch/nn/grad_check.hpp"

using namespace latsketch;
using namespace latsketch::backbone;
using nn::Rng;
using nn::Tensor;

namespace {

constexpr double kGradTol = 1e-4;

double weighted(const Tensor& y, const Tensor& w) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
    return s;
}

}  // namespace

TEST_CASE("condition table: gather sums class and style rows, scatter is its adjoint") {
    Rng rng(1);
    CondTable table(3, 2, 4, rng);
    const std::vector<std::optional<std::size_t>> cls = {2, std::nullopt, 0};
    const std::vector<std::optional<std::size_t>> sty = {1, 0, std::nullopt};
    const Tensor g = table.gather(cls, sty);
    REQUIRE(g.shape() == nn::Shape{3, 4});
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(g[k] == table.classes.value[2 * 4 + k] + table.styles.value[4 + k]);
        CHECK(g[4 + k] == table.styles.value[k]);
        CHECK(g[8 + k] == table.classes.value[k]);
    }
    CHECK(table.embed(2, 1).storage() == g.slice(0, 1).reshaped({4}).storage());

    // <gather(x), w> differentiated by scatter equals the finite difference.
    const Tensor w = nn::randn({3, 4}, rng);
    table.scatter_grad(cls, sty, w);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(table.classes.grad[2 * 4 + k] == w[k]);
        CHECK(table.classes.grad[1 * 4 + k] == 0.0);
        CHECK(table.styles.grad[k] == w[4 + k]);
        CHECK(table.styles.grad[4 + k] == w[k]);
    }
    CHECK_THROWS_AS(table.embed(3, std::nullopt), UsageError);
    CHECK_THROWS_AS(table.embed(0, 2), UsageError);
}

TEST_CASE("autoencoder encode/decode gradients match finite differences") {
    Rng rng(2);
    AutoencoderConfig cfg{3, 8, 2, 3, 4};
    Autoencoder ae(cfg, rng);
    // Zero biases put dead-region pre-activations exactly on the ReLU kink.
    for (nn::Param* p : ae.params())
        if (p->name.ends_with(".bias")) p->value = nn::randn(p->value.shape(), rng) * 0.1;
    Tensor x = nn::randn({2, 3, 8, 8}, rng) * 0.5 + Tensor({2, 3, 8, 8}, 0.5);
    const Tensor w = nn::randn({2, 3, 8, 8}, rng);
    Tensor dx;
    auto params = ae.params();
    auto loss = [&] { return weighted(ae.decode_raw(ae.encode_raw(x, nn::Mode::train), nn::Mode::train), w); };
    auto backprop = [&] {
        nn::zero_grads(params);
        ae.decode_raw(ae.encode_raw(x, nn::Mode::train), nn::Mode::train);
        dx = ae.backward_encoder(ae.backward_decoder(w));
    };
    std::vector<nn::GradProbe> probes;
    for (nn::Param* p : params) probes.push_back({p->name, &p->value, &p->grad});
    probes.push_back({"input", &x, &dx});
    const auto r = nn::grad_check(loss, backprop, probes, 1e-5, rng, 8);
    INFO(r.worst);
    CHECK(r.max_rel_error < kGradTol);
}

TEST_CASE("denoiser gradients wrt parameters, latent input and conditioning match finite differences") {
    Rng rng(3);
    DenoiserConfig cfg;
    cfg.latent_channels = 2;
    cfg.latent_size = 4;
    cfg.base_channels = 4;
    cfg.mid_channels = 4;
    cfg.cond_dim = 6;
    cfg.groups = 2;
    Denoiser dn(cfg, rng);
    Tensor z = nn::randn({2, 2, 4, 4}, rng);
    Tensor cond = nn::randn({2, 6}, rng);
    const std::vector<double> t = {3.0, 17.0};
    const Tensor w = nn::randn({2, 2, 4, 4}, rng);
    Tensor dcond, dz;
    auto params = dn.params();
    auto loss = [&] { return weighted(dn.forward(z, t, cond), w); };
    auto backprop = [&] {
        nn::zero_grads(params);
        dn.forward(z, t, cond);
        dcond = dn.backward(w);
        dz = dn.input_grad();
    };
    std::vector<nn::GradProbe> probes;
    for (nn::Param* p : params) probes.push_back({p->name, &p->value, &p->grad});
    probes.push_back({"latent", &z, &dz});
    probes.push_back({"cond", &cond, &dcond});
    const auto r = nn::grad_check(loss, backprop, probes, 1e-5, rng, 6);
    INFO(r.worst);
    CHECK(r.max_rel_error < kGradTol);

    // Train and eval paths agree; taps cover every block at their native size.
    const auto out = dn.infer(z, t, cond, true);
    CHECK((out.eps - dn.forward(z, t, cond)).max_abs() < 1e-12);
    REQUIRE(out.taps.size() == Denoiser::tap_names().size());
    for (std::size_t i = 0; i < out.taps.size(); ++i) {
        CHECK(out.taps[i].name == Denoiser::tap_names()[i]);
        CHECK(out.taps[i].value.dim(1) == dn.tap_channels()[i]);
    }
    CHECK(out.taps[2].value.dim(2) == 1);
    CHECK_THROWS_AS(dn.infer(z, {1.5, 2.0}, cond, false), UsageError);
    CHECK_THROWS_AS(dn.infer(z, {1.0}, cond, false), ShapeError);
}

TEST_CASE("default denoiser taps stack to a 256-wide feature vector") {
    Rng rng(4);
    Denoiser dn(DenoiserConfig{}, rng);
    std::size_t total = 0;
    for (std::size_t c : dn.tap_channels()) total += c;
    CHECK(total == 256);
}

TEST_CASE("bundle lifecycle: untrained stages are refused, frozen bundles are immutable") {
    const auto& ds = testing::small_dataset();
    BackboneBundle fresh(testing::small_backbone_config(ds), 9);
    CHECK_THROWS_AS(fresh.freeze(), ModelError);
    CHECK_THROWS_AS(fresh.encode_image(ds.items[0].image), ModelError);
    CHECK_THROWS_AS(fresh.to_checkpoint(), ModelError);

    BackboneConfig bad = testing::small_backbone_config(ds);
    bad.schedule = {diffusion::ScheduleKind::linear, 100, 1e-4, 0.02};
    CHECK_THROWS_AS(BackboneBundle(bad, 1), ModelError);

    const BackboneBundle& b = testing::quick_backbone();
    CHECK(b.frozen());
    CHECK(b.content_digest().size() == 16);
    CHECK(b.compute_digest() == b.content_digest());
    CHECK_NOTHROW(b.verify_digest());
    auto& mutable_b = const_cast<BackboneBundle&>(b);
    CHECK_THROWS_AS(mutable_b.autoencoder(), ModelError);
    CHECK_THROWS_AS(mutable_b.denoiser(), ModelError);
    CHECK_THROWS_AS(mutable_b.cond_table(), ModelError);

    Tensor outside = ds.items[0].image;
    outside[0] = 1.5;
    CHECK_THROWS_AS(b.encode_image(outside), UsageError);
}

TEST_CASE("bundle encode/decode shapes and conditioning") {
    const BackboneBundle& b = testing::quick_backbone();
    const auto& ds = testing::small_dataset();
    const Tensor z = b.encode_image(ds.items[0].image);
    CHECK(z.shape() == nn::Shape{4, 8, 8});
    const Tensor img = b.decode_latent(z);
    CHECK(img.shape() == nn::Shape{3, 32, 32});
    for (double v : img.data()) CHECK_UNARY(v >= 0.0 && v <= 1.0);
    const Tensor both = b.encode_image(backbone::stack_images({&ds.items[0], &ds.items[1]}));
    CHECK(both.shape() == nn::Shape{2, 4, 8, 8});
    CHECK((both.slice(0, 1).reshaped({4, 8, 8}) - z).max_abs() < 1e-12);

    const Tensor c = b.embed_condition(1, std::nullopt), cs = b.embed_condition(1, 1);
    CHECK(c.shape() == nn::Shape{64});
    CHECK((cs - c).storage() == b.cond_table().styles.value.slice(1, 1).reshaped({64}).storage());
    const auto out = b.denoise_eps(z, 0, c, true);
    CHECK(out.eps.shape() == nn::Shape{4, 8, 8});
    CHECK(out.taps.size() == 5);
    CHECK_THROWS_AS(b.denoise_eps(z, 101, c, false), UsageError);
}

TEST_CASE("bundle checkpoints round-trip bit-exactly and reject tampering") {
    const BackboneBundle& b = testing::quick_backbone();
    const io::Checkpoint ck = b.to_checkpoint();
    CHECK(ck.model_kind == "backbone");
    const auto& meta = ck.metadata;
    CHECK(meta.at("content_digest") == b.content_digest());
    CHECK(meta.at("schedule").at("T") == 100);
    CHECK(meta.at("tap_channels") == nlohmann::json::array({32, 64, 64, 64, 32}));
    CHECK(meta.at("class_names").size() == 8);
    CHECK(meta.at("latent_scale").size() == 4);

    const auto back = BackboneBundle::from_checkpoint(io::decode_checkpoint(io::encode_checkpoint(ck)));
    CHECK(back->frozen());
    CHECK(back->content_digest() == b.content_digest());
    CHECK(back->compute_digest() == b.content_digest());
    const Tensor& img = testing::small_dataset().items[5].image;
    CHECK(back->encode_image(img).storage() == b.encode_image(img).storage());

    io::Checkpoint tampered = ck;
    tampered.tensors[3].value[0] += 0.5;
    CHECK_THROWS_AS(BackboneBundle::from_checkpoint(tampered), ModelError);
    io::Checkpoint wrong_kind = ck;
    wrong_kind.model_kind = "lctn";
    CHECK_THROWS_AS(BackboneBundle::from_checkpoint(wrong_kind), ModelError);

    testing::TempDir dir("bundle");
    b.save(dir.path() / "bb.dsk");
    CHECK(BackboneBundle::load(dir.path() / "bb.dsk")->content_digest() == b.content_digest());
}

TEST_CASE("backbone training is bit-reproducible under a fixed seed") {
    const auto a = testing::make_quick_backbone(5);
    const auto b = testing::make_quick_backbone(5);
    const auto c = testing::make_quick_backbone(6);
    CHECK(a->content_digest() == b->content_digest());
    CHECK(a->content_digest() != c->content_digest());
}

TEST_CASE("training reports are finite and the autoencoder fits unit-variance latents") {
    const auto& ds = testing::small_dataset();
    BackboneBundle b(testing::small_backbone_config(ds), 8);
    AutoencoderTrainConfig ac;
    ac.steps = 60;
    ac.batch = 8;
    const auto ae = train_autoencoder(b, ds, ac, Rng(8));
    CHECK(ae.losses.size() == 60);
    double early = 0, late = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        early += ae.losses[i];
        late += ae.losses[50 + i];
    }
    CHECK(late < early);
    CHECK(std::isfinite(ae.heldout_psnr));
    for (double sd : ae.scaled_latent_std) CHECK(sd == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ae.decode_probe < 1e-3);
    CHECK(b.autoencoder_trained());

    DenoiserTrainConfig dc;
    dc.steps = 20;
    dc.batch = 8;
    const auto dn = train_denoiser(b, ds, dc, Rng(8));
    CHECK(dn.losses.size() == 20);
    CHECK(std::isfinite(dn.heldout_loss_after));
    CHECK(b.denoiser_trained());
    BackboneBundle untrained(testing::small_backbone_config(ds), 8);
    CHECK_THROWS_AS(train_denoiser(untrained, ds, dc, Rng(8)), ModelError);
}
