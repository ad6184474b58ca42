// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/metrics/report.hpp"

#include <algorithm>
#include <cmath>

#include "latsketch/error.hpp"
#include "latsketch/metrics/image_metrics.hpp"

namespace latsketch::metrics {

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.n = values.size();
    if (values.empty()) return a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(a.n);
    for (double v : values) a.std += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(a.std / static_cast<double>(a.n));
    return a;
}

nlohmann::ordered_json to_json(const Aggregate& a) {
    return nlohmann::ordered_json{{"mean", a.mean}, {"std", a.std}, {"n", a.n}};
}

nlohmann::ordered_json EvalReport::to_json() const {
    using metrics::to_json;
    nlohmann::ordered_json j;
    j["k_ratio"] = k_ratio;
    j["k"] = k;
    j["step_mode"] = step_mode;
    j["jitter"] = jitter;
    j["n"] = iou.n;
    j["psnr"] = to_json(psnr);
    j["ssim"] = to_json(ssim);
    j["iou"] = to_json(iou);
    j["confidence"] = to_json(confidence);
    j["judge_heldout_acc"] = judge_heldout_acc;
    j["judge_valid"] = judge_valid;
    j["acc"] = acc ? nlohmann::ordered_json(*acc) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json pc = nlohmann::ordered_json::array();
    for (const ClassAcc& c : per_class) pc.push_back({{"class", c.name}, {"acc", c.acc}, {"n", c.n}});
    j["per_class_acc"] = judge_valid ? pc : nlohmann::ordered_json(nullptr);
    if (direct_confidence) {
        j["direct"] = {{"confidence", to_json(*direct_confidence)},
                       {"acc", direct_acc ? nlohmann::ordered_json(*direct_acc) : nlohmann::ordered_json(nullptr)}};
    }
    return j;
}

EvalReport evaluate(const pipeline::Translator& translator, const Judge& judge,
                    const std::vector<const datagen::DataItem*>& items, const EvalOptions& opt) {
    if (items.empty()) throw UsageError("evaluate: empty item list");
    const auto& bundle = translator.bundle();
    if (judge.n_classes() != bundle.config().class_names.size())
        throw UsageError("judge class count does not match the backbone");

    EvalReport rep;
    rep.k_ratio = opt.k_ratio;
    rep.k = pipeline::k_from_ratio(opt.k_ratio, bundle.schedule().steps());
    rep.jitter = opt.jitter;
    rep.step_mode = pipeline::to_string(opt.step_mode);
    rep.judge_heldout_acc = judge.heldout_acc;
    rep.judge_valid = judge.heldout_acc >= kJudgeGate;

    const nn::Rng jitter_root = nn::Rng(opt.seed).substream("jitter");
    std::vector<double> psnrs, ssims, ious, confs, direct_confs;
    std::vector<std::size_t> hits(judge.n_classes(), 0), counts(judge.n_classes(), 0);
    std::size_t direct_hits = 0;
    for (const datagen::DataItem* it : items) {
        Tensor sketch = it->edges;
        if (opt.jitter > 0) {
            nn::Rng r = jitter_root.substream(it->id);
            sketch = datagen::jitter_sketch(it->edges, opt.jitter, r);
        }
        pipeline::SampleConfig cfg;
        cfg.k_ratio = opt.k_ratio;
        cfg.seed = opt.seed + it->id;
        cfg.class_id = it->class_id;
        if (opt.use_styles) cfg.style_id = it->style_id;
        cfg.step_mode = opt.step_mode;
        cfg.return_direct_decode = opt.direct;
        const pipeline::TranslationResult res = translator.translate(sketch, cfg);

        psnrs.push_back(std::min(psnr(res.image, it->image), kPsnrCap));
        ssims.push_back(ssim(res.image, it->image));
        ious.push_back(silhouette_iou(res.image, sketch));
        const Tensor p = judge.probabilities(res.image);
        confs.push_back(p[it->class_id]);
        const auto best = static_cast<std::size_t>(std::max_element(p.raw(), p.raw() + p.size()) - p.raw());
        ++counts[it->class_id];
        hits[it->class_id] += best == it->class_id;
        if (res.direct) {
            const Tensor pd = judge.probabilities(*res.direct);
            direct_confs.push_back(pd[it->class_id]);
            direct_hits += static_cast<std::size_t>(std::max_element(pd.raw(), pd.raw() + pd.size()) - pd.raw()) ==
                           it->class_id;
        }
    }
    rep.psnr = aggregate(psnrs);
    rep.ssim = aggregate(ssims);
    rep.iou = aggregate(ious);
    rep.confidence = aggregate(confs);
    if (opt.direct) rep.direct_confidence = aggregate(direct_confs);
    if (rep.judge_valid) {
        std::size_t total = 0;
        for (std::size_t c = 0; c < hits.size(); ++c) {
            total += hits[c];
            if (counts[c] == 0) continue;
            rep.per_class.push_back({judge.class_names()[c], static_cast<double>(hits[c]) / static_cast<double>(counts[c]),
                                     counts[c]});
        }
        rep.acc = static_cast<double>(total) / static_cast<double>(items.size());
        if (opt.direct) rep.direct_acc = static_cast<double>(direct_hits) / static_cast<double>(items.size());
    }
    return rep;
}

std::vector<SweepRow> sweep_k(const pipeline::Translator& translator, const Judge& judge,
                              const std::vector<const datagen::DataItem*>& items, const std::vector<double>& ratios,
                              const EvalOptions& options) {
    if (ratios.empty()) throw UsageError("sweep_k: no k ratios");
    if (items.empty()) throw UsageError("sweep_k: empty test set");
    std::vector<SweepRow> rows;
    for (double r : ratios) {
        EvalOptions o = options;
        o.k_ratio = r;
        o.direct = false;
        const EvalReport rep = evaluate(translator, judge, items, o);
        rows.push_back({r, rep.k, rep.iou, rep.confidence, rep.ssim, rep.acc});
    }
    return rows;
}

std::vector<double> linspace(double from, double to, std::size_t points) {
    if (points == 0) throw UsageError("linspace needs at least one point");
    if (points == 1) return {from};
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i)
        out[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
    return out;
}

nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const SweepRow& r : rows) {
        out.push_back({{"k_ratio", r.k_ratio},
                       {"k", r.k},
                       {"iou", to_json(r.iou)},
                       {"confidence", to_json(r.confidence)},
                       {"ssim", to_json(r.ssim)},
                       {"acc", r.acc ? nlohmann::ordered_json(*r.acc) : nlohmann::ordered_json(nullptr)}});
    }
    return out;
}

}  // namespace latsketch::metrics
