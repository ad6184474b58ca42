// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/lctn/lctn.hpp"

#include <algorithm>
#include <cmath>

#include "latsketch/error.hpp"
#include "latsketch/nn/adam.hpp"

namespace latsketch::lctn {

namespace {

using backbone::BackboneBundle;

constexpr std::size_t kChunk = 128;

// [N, C, h, w] <-> [N*h*w, C], rows ordered (n, y, x).
Tensor to_rows(const Tensor& x) {
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor out({n * hw, c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double* src = x.raw() + (b * c + k) * hw;
            for (std::size_t p = 0; p < hw; ++p) out[(b * hw + p) * c + k] = src[p];
        }
    return out;
}

Tensor from_rows(const Tensor& rows, const Shape& shape) {
    const std::size_t n = shape[0], c = shape[1], hw = shape[2] * shape[3];
    Tensor out(shape);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            double* dst = out.raw() + (b * c + k) * hw;
            for (std::size_t p = 0; p < hw; ++p) dst[p] = rows[(b * hw + p) * c + k];
        }
    return out;
}

void require_frozen(const BackboneBundle& bundle) {
    if (!bundle.frozen()) throw ModelError("feature extraction requires a frozen backbone");
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    Shape s = x.shape();
    const std::size_t stride = x.size() / s[0];
    s[0] = rows.size();
    Tensor out(s);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.raw() + rows[i] * stride, x.raw() + (rows[i] + 1) * stride, out.raw() + i * stride);
    return out;
}

}  // namespace

Tensor sketch_image(const Tensor& sketch) {
    const bool flat = sketch.rank() == 2;
    if (!flat && !(sketch.rank() == 3 && sketch.dim(0) == 1))
        throw ShapeError("sketch must be [H, W] or [1, H, W], got " + nn::shape_str(sketch.shape()));
    const std::size_t h = sketch.dim(flat ? 0 : 1), w = sketch.dim(flat ? 1 : 2), hw = h * w;
    Tensor img({3, h, w});
    for (std::size_t i = 0; i < hw; ++i) {
        const double v = sketch[i];
        if (!(v >= 0.0 && v <= 1.0)) throw UsageError("sketch values must lie in [0, 1]");
        img[i] = img[hw + i] = img[2 * hw + i] = 1.0 - v;
    }
    return img;
}

Tensor extract_features(const BackboneBundle& bundle, const Tensor& sketch_latents, const Tensor& conds) {
    require_frozen(bundle);
    if (sketch_latents.rank() != 4) throw ShapeError("sketch latents must be [N, C, h, w]");
    const std::size_t n = sketch_latents.dim(0), s = sketch_latents.dim(2);
    const auto channels = bundle.tap_channels();
    std::size_t d_f = 0;
    for (std::size_t c : channels) d_f += c;

    const backbone::DenoiseOutput out =
        bundle.denoiser().infer(sketch_latents, std::vector<double>(n, 0.0), conds, /*want_taps=*/true);
    Tensor f({n, d_f, s, s});
    const std::size_t plane = s * s;
    std::size_t offset = 0;
    for (const backbone::Tap& tap : out.taps) {
        const nn::BilinearResize resize("resize." + tap.name, s, s);
        const Tensor r = resize.infer(tap.value);
        const std::size_t c = r.dim(1);
        for (std::size_t b = 0; b < n; ++b)
            std::copy(r.raw() + b * c * plane, r.raw() + (b + 1) * c * plane, f.raw() + (b * d_f + offset) * plane);
        offset += c;
    }
    return f;
}

Tensor extract_features_one(const BackboneBundle& bundle, const Tensor& sketch_latent, const Tensor& cond) {
    if (sketch_latent.rank() != 3 || cond.rank() != 1) throw ShapeError("expected latent [C, h, w] and cond [d]");
    Shape ls{1};
    ls.insert(ls.end(), sketch_latent.shape().begin(), sketch_latent.shape().end());
    const Tensor f = extract_features(bundle, sketch_latent.reshaped(ls), cond.reshaped({1, cond.size()}));
    return f.reshaped({f.dim(1), f.dim(2), f.dim(3)});
}

LctnModel::LctnModel(std::size_t feature_dim, std::size_t out_channels, nn::Rng& rng, double init_std)
    : feature_dim_(feature_dim), out_channels_(out_channels) {
    if (feature_dim == 0 || out_channels == 0) throw UsageError("LCTN dimensions must be positive");
    nn::Rng init = rng.substream("lctn");
    std::size_t in = feature_dim;
    std::size_t i = 0;
    for (std::size_t width : hidden_widths()) {
        const std::string tag = "lctn.hidden" + std::to_string(i++);
        net_.add<nn::Linear>(tag + ".fc", in, width, init, init_std);
        net_.add<nn::ReLU>(tag + ".relu");
        norms_.push_back(&net_.add<nn::BatchNorm>(tag + ".bn", width));
        in = width;
    }
    net_.add<nn::Linear>("lctn.out", in, out_channels, init, init_std);
}

Tensor LctnModel::forward(const Tensor& features, Mode mode) {
    if (mode == Mode::eval) return infer(features);
    if (features.rank() != 4 || features.dim(1) != feature_dim_)
        throw ShapeError("LCTN expects [N, " + std::to_string(feature_dim_) + ", h, w], got " +
                         nn::shape_str(features.shape()));
    in_shape_ = features.shape();
    const Tensor y = net_.forward(to_rows(features), Mode::train);
    return from_rows(y, {in_shape_[0], out_channels_, in_shape_[2], in_shape_[3]});
}

Tensor LctnModel::infer(const Tensor& features) const {
    const bool single = features.rank() == 3;
    const Tensor f = single ? features.reshaped({1, features.dim(0), features.dim(1), features.dim(2)}) : features;
    if (f.rank() != 4 || f.dim(1) != feature_dim_)
        throw ShapeError("LCTN expects feature width " + std::to_string(feature_dim_) + ", got " +
                         nn::shape_str(features.shape()));
    const Tensor y = from_rows(net_.infer(to_rows(f)), {f.dim(0), out_channels_, f.dim(2), f.dim(3)});
    return single ? y.reshaped({out_channels_, f.dim(2), f.dim(3)}) : y;
}

Tensor LctnModel::backward(const Tensor& grad_out) {
    if (in_shape_.empty()) throw UsageError("LCTN backward without a train-mode forward");
    if (grad_out.shape() != Shape{in_shape_[0], out_channels_, in_shape_[2], in_shape_[3]})
        throw ShapeError("LCTN backward got " + nn::shape_str(grad_out.shape()));
    const Tensor g = net_.backward(to_rows(grad_out));
    const Shape s = in_shape_;
    in_shape_.clear();
    return from_rows(g, s);
}

io::Checkpoint LctnModel::to_checkpoint() const {
    io::Checkpoint ck;
    ck.model_kind = kLctnKind;
    for (const nn::Param* p : net_.params()) ck.tensors.push_back({p->name, p->value});
    for (const nn::BatchNorm* bn : norms_) {
        ck.tensors.push_back({bn->name() + ".running_mean", bn->running_mean});
        ck.tensors.push_back({bn->name() + ".running_var", bn->running_var});
    }
    ck.metadata["feature_dim"] = feature_dim_;
    ck.metadata["hidden"] = hidden_widths();
    ck.metadata["out_channels"] = out_channels_;
    ck.metadata["backbone_digest"] = backbone_digest;
    ck.metadata["content_digest"] = io::digest_hex(io::fnv1a64(io::f32_payload(ck.tensors)));
    return ck;
}

std::unique_ptr<LctnModel> LctnModel::from_checkpoint(const io::Checkpoint& ck, const BackboneBundle& bundle) {
    if (ck.model_kind != kLctnKind)
        throw ModelError("expected an '" + std::string(kLctnKind) + "' checkpoint, got '" + ck.model_kind + "'");
    std::size_t feature_dim = 0, out_channels = 0;
    std::string trained_against;
    try {
        feature_dim = ck.metadata.at("feature_dim").get<std::size_t>();
        out_channels = ck.metadata.at("out_channels").get<std::size_t>();
        trained_against = ck.metadata.at("backbone_digest").get<std::string>();
        if (ck.metadata.at("hidden").get<std::vector<std::size_t>>() != hidden_widths())
            throw ModelError("LCTN checkpoint has unexpected hidden widths");
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("LCTN checkpoint metadata: ") + e.what());
    }
    if (trained_against != bundle.content_digest())
        throw ModelError("LCTN was trained against backbone " + trained_against + " but the loaded backbone is " +
                         bundle.content_digest());
    std::size_t d_f = 0;
    for (std::size_t c : bundle.tap_channels()) d_f += c;
    if (feature_dim != d_f || out_channels != bundle.latent_channels())
        throw ModelError("LCTN dimensions do not match the backbone");

    nn::Rng unused(0);
    auto m = std::make_unique<LctnModel>(feature_dim, out_channels, unused);
    auto assign = [&](const std::string& name, Tensor& dst) {
        const Tensor& src = ck.tensor(name);
        if (src.shape() != dst.shape()) throw ModelError("tensor " + name + " has shape " + nn::shape_str(src.shape()));
        dst = src;
    };
    for (nn::Param* p : m->net_.params()) assign(p->name, p->value);
    for (nn::BatchNorm* bn : m->norms_) {
        assign(bn->name() + ".running_mean", bn->running_mean);
        assign(bn->name() + ".running_var", bn->running_var);
    }
    m->backbone_digest = trained_against;
    return m;
}

void LctnModel::save(const std::filesystem::path& path) const { io::write_checkpoint(path, to_checkpoint()); }

std::unique_ptr<LctnModel> LctnModel::load(const std::filesystem::path& path, const BackboneBundle& bundle) {
    return from_checkpoint(io::read_checkpoint(path), bundle);
}

PairSet build_pairs(const BackboneBundle& bundle, const std::vector<const datagen::DataItem*>& items) {
    require_frozen(bundle);
    if (items.empty()) throw DataError("no items to build LCTN pairs from");
    PairSet set;
    std::vector<Tensor> feats, targets;
    for (std::size_t b = 0; b < items.size(); b += kChunk) {
        const std::size_t m = std::min(kChunk, items.size() - b);
        std::vector<Tensor> sketches, images, conds;
        for (std::size_t i = b; i < b + m; ++i) {
            sketches.push_back(sketch_image(items[i]->edges));
            images.push_back(items[i]->image);
            conds.push_back(bundle.embed_condition(items[i]->class_id, std::nullopt));
            set.class_ids.push_back(items[i]->class_id);
        }
        const Tensor lat = bundle.encode_image(nn::stack(sketches));
        feats.push_back(extract_features(bundle, lat, nn::stack(conds)));
        targets.push_back(bundle.encode_image(nn::stack(images)));
    }
    auto join = [](const std::vector<Tensor>& parts) {
        Shape s = parts.front().shape();
        s[0] = 0;
        for (const Tensor& p : parts) s[0] += p.dim(0);
        Tensor out(s);
        std::size_t at = 0;
        for (const Tensor& p : parts) {
            std::copy(p.raw(), p.raw() + p.size(), out.raw() + at);
            at += p.size();
        }
        return out;
    };
    set.features = join(feats);
    set.targets = join(targets);
    return set;
}

double latent_mse(const LctnModel& model, const PairSet& pairs) {
    double sse = 0.0;
    const std::size_t n = pairs.features.dim(0);
    for (std::size_t b = 0; b < n; b += kChunk) {
        const std::size_t m = std::min(kChunk, n - b);
        sse += (model.infer(pairs.features.slice(b, m)) - pairs.targets.slice(b, m)).sum_squares();
    }
    return sse / static_cast<double>(pairs.targets.size());
}

double constant_baseline_mse(const Tensor& train_targets, const Tensor& eval_targets) {
    const std::size_t n = train_targets.dim(0), per = train_targets.size() / n;
    if (eval_targets.size() % per != 0) throw ShapeError("baseline target shapes differ");
    std::vector<double> mean(per, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < per; ++i) mean[i] += train_targets[b * per + i];
    for (double& v : mean) v /= static_cast<double>(n);
    double sse = 0.0;
    for (std::size_t i = 0; i < eval_targets.size(); ++i) {
        const double d = eval_targets[i] - mean[i % per];
        sse += d * d;
    }
    return sse / static_cast<double>(eval_targets.size());
}

std::unique_ptr<LctnModel> train_lctn(const BackboneBundle& bundle, const datagen::Dataset& data,
                                      const LctnTrainConfig& cfg, nn::Rng rng, LctnTrainReport* report,
                                      const ProgressFn& progress) {
    require_frozen(bundle);
    if (cfg.batch < 1 || cfg.iters < 1) throw UsageError("LCTN batch and iteration count must be positive");
    if (!(cfg.lr > 0.0)) throw UsageError("LCTN learning rate must be positive");
    LctnTrainReport local;
    LctnTrainReport& rep = report ? *report : local;
    rep = {};
    rep.digest_before = bundle.compute_digest();
    bundle.verify_digest();

    const PairSet train = build_pairs(bundle, data.select(datagen::Split::train));
    const std::size_t n = train.features.dim(0);
    auto model = std::make_unique<LctnModel>(train.features.dim(1), train.targets.dim(1), rng, cfg.init_std);
    model->backbone_digest = bundle.content_digest();

    nn::Adam opt(model->params(), {.lr = cfg.lr});
    nn::Rng batches = rng.substream("batches");
    const std::size_t epoch = std::max<std::size_t>(1, n / cfg.batch);
    rep.losses.reserve(cfg.iters);
    rep.lrs.reserve(cfg.iters);
    for (std::size_t it = 1; it <= cfg.iters; ++it) {
        std::vector<std::size_t> rows(cfg.batch);
        for (auto& r : rows) r = batches.below(n);
        const Tensor f = gather_rows(train.features, rows);
        const Tensor target = gather_rows(train.targets, rows);
        Tensor g = model->forward(f, Mode::train) - target;
        const double loss = g.sum_squares() / static_cast<double>(g.size());
        if (!std::isfinite(loss)) throw NumericError("LCTN training diverged at iteration " + std::to_string(it));
        g *= 2.0 / static_cast<double>(g.size());
        model->backward(g);
        opt.set_lr(nn::warmup_lr(cfg.lr, it, cfg.warmup));
        opt.step();
        rep.losses.push_back(loss);
        rep.lrs.push_back(opt.lr());
        if (it % epoch == 0) {
            bundle.verify_digest();
            ++rep.digest_checks;
        }
        if (progress && cfg.log_every && it % cfg.log_every == 0) {
            double s = 0.0;
            for (std::size_t i = it - cfg.log_every; i < it; ++i) s += rep.losses[i];
            progress(it, s / static_cast<double>(cfg.log_every));
        }
    }
    bundle.verify_digest();
    ++rep.digest_checks;
    rep.digest_after = bundle.compute_digest();

    const auto test_items = data.select(datagen::Split::test);
    if (!test_items.empty()) {
        const PairSet test = build_pairs(bundle, test_items);
        rep.heldout_mse = latent_mse(*model, test);
        rep.baseline_mse = constant_baseline_mse(train.targets, test.targets);
    }
    return model;
}

}  // namespace latsketch::lctn
