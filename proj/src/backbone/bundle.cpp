// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/backbone/bundle.hpp"

#include <algorithm>

#include "latsketch/error.hpp"

namespace latsketch::backbone {

namespace {

using OptIds = std::vector<std::optional<std::size_t>>;

void check_row(std::optional<std::size_t> id, std::size_t rows, const char* what) {
    if (id && *id >= rows)
        throw UsageError(std::string(what) + " id " + std::to_string(*id) + " out of range [0, " +
                         std::to_string(rows) + ")");
}

Tensor add_batch_axis(const Tensor& x, std::size_t rank, bool& added) {
    added = x.rank() == rank - 1;
    if (!added) return x;
    Shape s{1};
    s.insert(s.end(), x.shape().begin(), x.shape().end());
    return x.reshaped(s);
}

Tensor drop_batch_axis(const Tensor& x) { return x.reshaped(Shape(x.shape().begin() + 1, x.shape().end())); }

}  // namespace

CondTable::CondTable(std::size_t n_classes, std::size_t n_styles, std::size_t dim, nn::Rng& rng) {
    if (n_classes == 0 || n_styles == 0) throw UsageError("conditioning table needs at least one class and style");
    nn::Rng init = rng.substream("cond");
    classes = nn::Param("cond.classes", nn::init_normal({n_classes, dim}, 0.02, init));
    styles = nn::Param("cond.styles", nn::init_normal({n_styles, dim}, 0.02, init));
}

Tensor CondTable::embed(std::size_t class_id, std::optional<std::size_t> style_id) const {
    return gather({class_id}, {style_id}).reshaped({dim()});
}

Tensor CondTable::gather(const OptIds& class_ids, const OptIds& style_ids) const {
    if (class_ids.size() != style_ids.size()) throw ShapeError("class and style id lists differ in length");
    const std::size_t d = dim();
    Tensor out({class_ids.size(), d});
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
        check_row(class_ids[i], n_classes(), "class");
        check_row(style_ids[i], n_styles(), "style");
        double* row = out.raw() + i * d;
        if (class_ids[i]) {
            const double* c = classes.value.raw() + *class_ids[i] * d;
            for (std::size_t k = 0; k < d; ++k) row[k] += c[k];
        }
        if (style_ids[i]) {
            const double* s = styles.value.raw() + *style_ids[i] * d;
            for (std::size_t k = 0; k < d; ++k) row[k] += s[k];
        }
    }
    return out;
}

void CondTable::scatter_grad(const OptIds& class_ids, const OptIds& style_ids, const Tensor& grad) {
    const std::size_t d = dim();
    if (grad.shape() != Shape{class_ids.size(), d} || style_ids.size() != class_ids.size())
        throw ShapeError("cond grad " + nn::shape_str(grad.shape()));
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
        const double* g = grad.raw() + i * d;
        if (class_ids[i]) {
            double* c = classes.grad.raw() + *class_ids[i] * d;
            for (std::size_t k = 0; k < d; ++k) c[k] += g[k];
        }
        if (style_ids[i]) {
            double* s = styles.grad.raw() + *style_ids[i] * d;
            for (std::size_t k = 0; k < d; ++k) s[k] += g[k];
        }
    }
}

namespace {

BackboneConfig checked(BackboneConfig config) {
    if (config.class_names.empty()) throw UsageError("backbone needs at least one class name");
    if (config.style_names.empty()) throw UsageError("backbone needs at least one style name");
    if (config.denoiser.latent_channels != config.autoencoder.latent_channels ||
        config.denoiser.latent_size != config.autoencoder.image_size / 4)
        throw UsageError("denoiser latent geometry does not match the autoencoder");
    return config;
}

}  // namespace

BackboneBundle::BackboneBundle(BackboneConfig config, std::uint64_t seed)
    : BackboneBundle(checked(std::move(config)), nn::Rng(seed).substream("init")) {}

BackboneBundle::BackboneBundle(BackboneConfig config, nn::Rng init)
    : config_(std::move(config)),
      schedule_(diffusion::NoiseSchedule::make(config_.schedule)),
      autoencoder_(config_.autoencoder, init),
      denoiser_(config_.denoiser, init),
      cond_(config_.class_names.size(), config_.style_names.size(), config_.denoiser.cond_dim, init) {
    schedule_.require_reaches_noise();
}

void BackboneBundle::require_mutable(const char* what) const {
    if (frozen_) throw ModelError(std::string("backbone is frozen; refusing mutable access to ") + what);
}

Autoencoder& BackboneBundle::autoencoder() {
    require_mutable("the autoencoder");
    return autoencoder_;
}

Denoiser& BackboneBundle::denoiser() {
    require_mutable("the denoiser");
    return denoiser_;
}

CondTable& BackboneBundle::cond_table() {
    require_mutable("the conditioning table");
    return cond_;
}

void BackboneBundle::mark_autoencoder_trained(double recon_psnr, double decode_probe) {
    require_mutable("training flags");
    ae_trained_ = true;
    recon_psnr_ = recon_psnr;
    decode_probe_ = decode_probe;
}

void BackboneBundle::mark_denoiser_trained() {
    require_mutable("training flags");
    dn_trained_ = true;
}

Tensor BackboneBundle::encode_image(const Tensor& image) const {
    if (!ae_trained_) throw ModelError("encode_image on an untrained autoencoder");
    for (double v : image.data())
        if (!(v >= 0.0 && v <= 1.0)) throw UsageError("encode_image: pixel values must lie in [0, 1]");
    bool added = false;
    Tensor z = autoencoder_.encode(add_batch_axis(image, 4, added));
    return added ? drop_batch_axis(z) : z;
}

Tensor BackboneBundle::decode_latent(const Tensor& z) const {
    if (!ae_trained_) throw ModelError("decode_latent on an untrained autoencoder");
    bool added = false;
    Tensor img = autoencoder_.decode(add_batch_axis(z, 4, added));
    return added ? drop_batch_axis(img) : img;
}

Tensor BackboneBundle::embed_condition(std::size_t class_id, std::optional<std::size_t> style_id) const {
    return cond_.embed(class_id, style_id);
}

DenoiseOutput BackboneBundle::denoise_eps(const Tensor& z_t, std::size_t t, const Tensor& cond, bool want_taps) const {
    if (t > schedule_.steps()) throw UsageError("denoise_eps: timestep " + std::to_string(t) + " exceeds T");
    if (cond.rank() != 1) throw ShapeError("denoise_eps expects a [cond_dim] vector");
    bool added = false;
    const Tensor z = add_batch_axis(z_t, 4, added);
    const std::size_t n = z.dim(0), d = cond.size();
    Tensor conds({n, d});
    for (std::size_t i = 0; i < n; ++i) std::copy(cond.raw(), cond.raw() + d, conds.raw() + i * d);
    DenoiseOutput out = denoiser_.infer(z, std::vector<double>(n, static_cast<double>(t)), conds, want_taps);
    if (added) out.eps = drop_batch_axis(out.eps);
    return out;
}

std::vector<nn::Param*> BackboneBundle::all_params() {
    std::vector<nn::Param*> out = autoencoder_.params();
    for (nn::Param* p : denoiser_.params()) out.push_back(p);
    out.push_back(&cond_.classes);
    out.push_back(&cond_.styles);
    return out;
}

std::vector<io::NamedTensor> BackboneBundle::named_tensors() const {
    std::vector<io::NamedTensor> out;
    for (const nn::Param* p : autoencoder_.params()) out.push_back({p->name, p->value});
    out.push_back({"autoencoder.latent_scale", Tensor({autoencoder_.latent_scale.size()}, autoencoder_.latent_scale)});
    for (const nn::Param* p : denoiser_.params()) out.push_back({p->name, p->value});
    out.push_back({cond_.classes.name, cond_.classes.value});
    out.push_back({cond_.styles.name, cond_.styles.value});
    return out;
}

std::string BackboneBundle::compute_digest() const {
    const auto tensors = named_tensors();
    return io::digest_hex(io::fnv1a64(io::f32_payload(tensors)));
}

void BackboneBundle::freeze() {
    if (frozen_) return;
    if (!ae_trained_ || !dn_trained_) throw ModelError("cannot freeze an untrained backbone");
    for (nn::Param* p : all_params()) {
        for (double& v : p->value.data()) v = io::round_to_f32(v);
        p->grad.fill(0.0);
    }
    for (double& s : autoencoder_.latent_scale) s = io::round_to_f32(s);
    frozen_ = true;
    digest_ = compute_digest();
}

void BackboneBundle::verify_digest() const {
    if (!frozen_) throw ModelError("backbone is not frozen");
    const std::string now = compute_digest();
    if (now != digest_) throw ModelError("backbone parameters changed: digest " + now + " != frozen " + digest_);
}

io::Checkpoint BackboneBundle::to_checkpoint() const {
    if (!frozen_) throw ModelError("only a frozen backbone can be checkpointed");
    io::Checkpoint ck;
    ck.model_kind = kBackboneKind;
    ck.tensors = named_tensors();
    const auto& a = config_.autoencoder;
    const auto& d = config_.denoiser;
    const auto& s = config_.schedule;
    auto& m = ck.metadata;
    m["schedule"] = {{"kind", diffusion::to_string(s.kind)},
                     {"T", s.steps},
                     {"beta_start", s.beta_start},
                     {"beta_end", s.beta_end}};
    m["latent_scale"] = autoencoder_.latent_scale;
    m["class_names"] = config_.class_names;
    m["style_names"] = config_.style_names;
    m["tap_channels"] = denoiser_.tap_channels();
    m["recon_psnr"] = recon_psnr_;
    m["content_digest"] = digest_;
    m["decode_probe"] = decode_probe_;
    m["architecture"] = {{"image_channels", a.image_channels}, {"image_size", a.image_size},
                         {"latent_channels", a.latent_channels}, {"ae_width1", a.width1},
                         {"ae_width2", a.width2}, {"base_channels", d.base_channels},
                         {"mid_channels", d.mid_channels}, {"cond_dim", d.cond_dim},
                         {"groups", d.groups}};
    return ck;
}

std::unique_ptr<BackboneBundle> BackboneBundle::from_checkpoint(const io::Checkpoint& ck) {
    if (ck.model_kind != kBackboneKind)
        throw ModelError("expected a '" + std::string(kBackboneKind) + "' checkpoint, got '" + ck.model_kind + "'");
    BackboneConfig cfg;
    std::string stored;
    double recon = 0.0, probe = 0.0;
    std::vector<std::size_t> taps;
    try {
        const auto& m = ck.metadata;
        const auto& arch = m.at("architecture");
        cfg.autoencoder.image_channels = arch.at("image_channels").get<std::size_t>();
        cfg.autoencoder.image_size = arch.at("image_size").get<std::size_t>();
        cfg.autoencoder.latent_channels = arch.at("latent_channels").get<std::size_t>();
        cfg.autoencoder.width1 = arch.at("ae_width1").get<std::size_t>();
        cfg.autoencoder.width2 = arch.at("ae_width2").get<std::size_t>();
        cfg.denoiser.latent_channels = cfg.autoencoder.latent_channels;
        cfg.denoiser.latent_size = cfg.autoencoder.image_size / 4;
        cfg.denoiser.base_channels = arch.at("base_channels").get<std::size_t>();
        cfg.denoiser.mid_channels = arch.at("mid_channels").get<std::size_t>();
        cfg.denoiser.cond_dim = arch.at("cond_dim").get<std::size_t>();
        cfg.denoiser.groups = arch.at("groups").get<std::size_t>();
        const auto& s = m.at("schedule");
        cfg.schedule.kind = diffusion::schedule_kind_from_string(s.at("kind").get<std::string>());
        cfg.schedule.steps = s.at("T").get<std::size_t>();
        cfg.schedule.beta_start = s.at("beta_start").get<double>();
        cfg.schedule.beta_end = s.at("beta_end").get<double>();
        cfg.class_names = m.at("class_names").get<std::vector<std::string>>();
        cfg.style_names = m.at("style_names").get<std::vector<std::string>>();
        stored = m.at("content_digest").get<std::string>();
        recon = m.at("recon_psnr").get<double>();
        probe = m.value("decode_probe", 0.0);
        taps = m.at("tap_channels").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("backbone checkpoint metadata: ") + e.what());
    } catch (const UsageError& e) {
        throw ModelError(std::string("backbone checkpoint metadata: ") + e.what());
    }

    auto b = std::make_unique<BackboneBundle>(std::move(cfg), 0);
    for (nn::Param* p : b->all_params()) {
        const Tensor& t = ck.tensor(p->name);
        if (t.shape() != p->value.shape())
            throw ModelError("tensor " + p->name + " has shape " + nn::shape_str(t.shape()) + ", expected " +
                             nn::shape_str(p->value.shape()));
        p->value = t;
    }
    const Tensor& scale = ck.tensor("autoencoder.latent_scale");
    if (scale.size() != b->autoencoder_.latent_scale.size()) throw ModelError("latent_scale length mismatch");
    b->autoencoder_.latent_scale.assign(scale.data().begin(), scale.data().end());
    if (taps != b->denoiser_.tap_channels()) throw ModelError("checkpoint tap channels do not match the architecture");

    b->ae_trained_ = b->dn_trained_ = true;
    b->recon_psnr_ = recon;
    b->decode_probe_ = probe;
    b->frozen_ = true;
    b->digest_ = b->compute_digest();
    if (b->digest_ != stored)
        throw ModelError("backbone checkpoint digest mismatch: stored " + stored + ", computed " + b->digest_);
    return b;
}

void BackboneBundle::save(const std::filesystem::path& path) const { io::write_checkpoint(path, to_checkpoint()); }

std::unique_ptr<BackboneBundle> BackboneBundle::load(const std::filesystem::path& path) {
    return from_checkpoint(io::read_checkpoint(path));
}

}  // namespace latsketch::backbone
