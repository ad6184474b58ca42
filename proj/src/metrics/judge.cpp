// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/metrics/judge.hpp"

#include <algorithm>
#include <cmath>

#include "latsketch/error.hpp"
#include "latsketch/nn/adam.hpp"

namespace latsketch::metrics {

namespace {

constexpr std::size_t kHidden = 64;
constexpr std::size_t kChunk = 128;

void softmax_rows(Tensor& z) {
    const std::size_t n = z.dim(0), c = z.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = z.raw() + i * c;
        const double m = *std::max_element(row, row + c);
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) s += (row[k] = std::exp(row[k] - m));
        for (std::size_t k = 0; k < c; ++k) row[k] /= s;
    }
}

}  // namespace

Judge::Judge(std::vector<std::string> class_names, std::size_t image_size, nn::Rng& rng)
    : class_names_(std::move(class_names)), image_size_(image_size) {
    if (class_names_.size() < 2) throw UsageError("judge needs at least two classes");
    if (image_size % 8 != 0) throw UsageError("judge image size must be divisible by 8");
    nn::Rng init = rng.substream("judge");
    features_.add<nn::Conv2d>("judge.conv1", 3, 16, 2, true, init);
    features_.add<nn::ReLU>("judge.relu1");
    features_.add<nn::Conv2d>("judge.conv2", 16, 32, 2, true, init);
    features_.add<nn::ReLU>("judge.relu2");
    features_.add<nn::Conv2d>("judge.conv3", 32, 32, 2, true, init);
    features_.add<nn::ReLU>("judge.relu3");
    const std::size_t flat = 32 * (image_size / 8) * (image_size / 8);
    head_.add<nn::Linear>("judge.fc1", flat, kHidden, init);
    head_.add<nn::ReLU>("judge.relu4");
    head_.add<nn::Linear>("judge.fc2", kHidden, class_names_.size(), init);
}

Tensor Judge::batched(const Tensor& images) const {
    const std::size_t s = image_size_;
    if (images.rank() == 3 && images.shape() == nn::Shape{3, s, s}) return images.reshaped({1, 3, s, s});
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s || images.dim(3) != s)
        throw ShapeError("judge expects [N,3," + std::to_string(s) + "," + std::to_string(s) + "], got " +
                         nn::shape_str(images.shape()));
    return images;
}

Tensor Judge::logits(const Tensor& images) const {
    const Tensor x = batched(images);
    const std::size_t n = x.dim(0);
    Tensor out({n, n_classes()});
    for (std::size_t b = 0; b < n; b += kChunk) {
        const std::size_t m = std::min(kChunk, n - b);
        const Tensor f = features_.infer(x.slice(b, m));
        const Tensor z = head_.infer(f.reshaped({m, f.size() / m}));
        std::copy(z.raw(), z.raw() + z.size(), out.raw() + b * n_classes());
    }
    return out;
}

Tensor Judge::probabilities(const Tensor& images) const {
    Tensor p = logits(images);
    softmax_rows(p);
    return p;
}

std::vector<std::size_t> Judge::predict(const Tensor& images) const {
    const Tensor z = logits(images);
    const std::size_t c = n_classes();
    std::vector<std::size_t> out(z.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::size_t>(std::max_element(z.raw() + i * c, z.raw() + (i + 1) * c) - (z.raw() + i * c));
    return out;
}

double Judge::train_step(const Tensor& images, const std::vector<std::size_t>& labels) {
    const Tensor x = batched(images);
    const std::size_t n = x.dim(0), c = n_classes();
    if (labels.size() != n) throw ShapeError("judge: one label per image required");
    const Tensor f = features_.forward(x, nn::Mode::train);
    Tensor p = head_.forward(f.reshaped({n, f.size() / n}), nn::Mode::train);
    softmax_rows(p);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw UsageError("judge label out of range");
        loss -= std::log(std::max(p[i * c + labels[i]], 1e-300));
        p[i * c + labels[i]] -= 1.0;
    }
    p *= 1.0 / static_cast<double>(n);
    const Tensor gf = head_.backward(p);
    features_.backward(gf.reshaped(f.shape()));
    return loss / static_cast<double>(n);
}

std::vector<nn::Param*> Judge::params() {
    std::vector<nn::Param*> out = features_.params();
    for (nn::Param* p : head_.params()) out.push_back(p);
    return out;
}

io::Checkpoint Judge::to_checkpoint() const {
    io::Checkpoint ck;
    ck.model_kind = kJudgeKind;
    for (const nn::Param* p : features_.params()) ck.tensors.push_back({p->name, p->value});
    for (const nn::Param* p : head_.params()) ck.tensors.push_back({p->name, p->value});
    ck.metadata["class_names"] = class_names_;
    ck.metadata["image_size"] = image_size_;
    ck.metadata["heldout_acc"] = heldout_acc;
    return ck;
}

std::unique_ptr<Judge> Judge::from_checkpoint(const io::Checkpoint& ck) {
    if (ck.model_kind != kJudgeKind) throw ModelError("expected a 'judge' checkpoint, got '" + ck.model_kind + "'");
    std::unique_ptr<Judge> j;
    try {
        nn::Rng unused(0);
        j = std::make_unique<Judge>(ck.metadata.at("class_names").get<std::vector<std::string>>(),
                                    ck.metadata.at("image_size").get<std::size_t>(), unused);
        j->heldout_acc = ck.metadata.at("heldout_acc").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("judge checkpoint metadata: ") + e.what());
    }
    for (nn::Param* p : j->params()) {
        const Tensor& t = ck.tensor(p->name);
        if (t.shape() != p->value.shape()) throw ModelError("tensor " + p->name + " has the wrong shape");
        p->value = t;
    }
    return j;
}

void Judge::save(const std::filesystem::path& path) const { io::write_checkpoint(path, to_checkpoint()); }

std::unique_ptr<Judge> Judge::load(const std::filesystem::path& path) {
    return from_checkpoint(io::read_checkpoint(path));
}

double classify_acc(const Judge& judge, const Tensor& images, const std::vector<std::size_t>& labels) {
    const auto pred = judge.predict(images);
    if (pred.size() != labels.size()) throw ShapeError("classify_acc: one label per image required");
    if (pred.empty()) throw UsageError("classify_acc: no images");
    for (std::size_t l : labels)
        if (l >= judge.n_classes()) throw UsageError("classify_acc: label " + std::to_string(l) + " exceeds the judge's class count");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::unique_ptr<Judge> train_judge(const datagen::Dataset& data, const JudgeTrainConfig& cfg, nn::Rng rng,
                                   JudgeReport* report, const std::function<void(std::size_t, double)>& progress) {
    const auto train = data.select(datagen::Split::train);
    const auto test = data.select(datagen::Split::test);
    if (train.empty()) throw DataError("dataset has no training items");
    if (cfg.batch == 0) throw UsageError("judge batch must be positive");
    auto judge = std::make_unique<Judge>(data.class_names, data.image_size, rng);
    nn::Adam opt(judge->params(), {.lr = cfg.lr});
    nn::Rng batches = rng.substream("batches");
    JudgeReport local;
    JudgeReport& rep = report ? *report : local;
    rep = {};
    double window = 0.0;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        std::vector<Tensor> imgs;
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < cfg.batch; ++i) {
            const datagen::DataItem* it = train[batches.below(train.size())];
            Tensor img = it->image;
            if (cfg.noise_std > 0)
                for (double& v : img.data()) v += cfg.noise_std * batches.normal();
            imgs.push_back(std::move(img));
            labels.push_back(it->class_id);
        }
        const double loss = judge->train_step(nn::stack(imgs), labels);
        if (!std::isfinite(loss)) throw NumericError("judge training diverged at step " + std::to_string(step));
        opt.step();
        rep.losses.push_back(loss);
        window += loss;
        if (progress && cfg.log_every && step % cfg.log_every == 0) {
            progress(step, window / static_cast<double>(cfg.log_every));
            window = 0.0;
        }
    }
    const auto& held = test.empty() ? train : test;
    std::vector<Tensor> imgs;
    std::vector<std::size_t> labels;
    for (const auto* it : held) {
        imgs.push_back(it->image);
        labels.push_back(it->class_id);
    }
    judge->heldout_acc = rep.heldout_acc = classify_acc(*judge, nn::stack(imgs), labels);
    return judge;
}

}  // namespace latsketch::metrics
