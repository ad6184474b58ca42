// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point: data generation, training, sampling,
// evaluation, k sweeps and the HTTP service.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "latsketch/backbone/training.hpp"
#include "latsketch/datagen/dataset.hpp"
#include "latsketch/error.hpp"
#include "latsketch/io/netpbm.hpp"
#include "latsketch/lctn/lctn.hpp"
#include "latsketch/metrics/judge.hpp"
#include "latsketch/metrics/report.hpp"
#include "latsketch/pipeline/pipeline.hpp"
#include "latsketch/service/service.hpp"

namespace fs = std::filesystem;
using namespace latsketch;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

/// Prints the resolved configuration and writes it, with results, as the run manifest.
class RunLog {
public:
    RunLog(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {
        std::cout << "command: " << command_ << '\n';
        for (const auto& [k, v] : config_.items()) std::cout << "  " << k << " = " << v.dump() << '\n';
        std::cout.flush();
    }

    Json& results() { return results_; }

    void write(const fs::path& path) const {
        Json j;
        j["tool"] = "latsketch";
        j["version"] = kVersion;
        j["command"] = command_;
        j["config"] = config_;
        j["results"] = results_;
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        f << j.dump(2) << '\n';
        if (!f) throw DataError("cannot write run manifest " + path.string());
        std::cout << "run manifest: " << path.string() << '\n';
    }

private:
    std::string command_;
    Json config_;
    Json results_ = Json::object();
};

fs::path manifest_beside(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

void write_json(const fs::path& path, const Json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << j.dump(2) << '\n';
    if (!f) throw DataError("cannot write " + path.string());
}

auto progress_printer(const char* stage) {
    return [stage](std::size_t step, double loss) {
        std::printf("%s step %zu loss %.6f\n", stage, step, loss);
        std::fflush(stdout);
    };
}

nn::Tensor read_sketch(const fs::path& path) {
    nn::Tensor t = io::read_netpbm(path);
    if (t.rank() != 3 || t.dim(0) != 1) throw DataError(path.string() + " is not a grayscale (P5) image");
    for (double& v : t.data()) v = v > 0.0 ? 1.0 : 0.0;
    return t;
}

std::unique_ptr<metrics::Judge> judge_for(const std::string& judge_path, const datagen::Dataset& data) {
    if (!judge_path.empty()) return metrics::Judge::load(judge_path);
    std::cout << "no --judge given; training one with the default recipe\n";
    return metrics::train_judge(data, {}, nn::Rng(0).substream("judge"));
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
    std::string out;
    std::size_t per_class = 200;
    std::uint64_t seed = 7;
    std::size_t size = 32;
    bool force = false;
};

int run_gen_data(const GenDataArgs& a) {
    RunLog log("gen-data", {{"out", a.out}, {"per_class", a.per_class}, {"seed", a.seed}, {"size", a.size}});
    datagen::DatasetSpec spec = datagen::default_spec();
    spec.per_class = a.per_class;
    spec.seed = a.seed;
    spec.image_size = a.size;
    const datagen::Dataset ds = datagen::write_dataset(spec, a.out, a.force);
    log.results()["items"] = ds.items.size();
    log.results()["train"] = ds.select(datagen::Split::train).size();
    log.results()["test"] = ds.select(datagen::Split::test).size();
    std::cout << "wrote " << ds.items.size() << " items to " << a.out << '\n';
    log.write(fs::path(a.out) / "run.json");
    return 0;
}

// ---- train-backbone ----------------------------------------------------------

struct TrainBackboneArgs {
    std::string data, out;
    std::size_t ae_steps = 10000, dn_steps = 30000, batch = 16, steps_T = 100;
    double lr = 1e-3;
    std::uint64_t seed = 1;
};

int run_train_backbone(const TrainBackboneArgs& a) {
    RunLog log("train-backbone", {{"data", a.data}, {"out", a.out}, {"ae_steps", a.ae_steps},
                                  {"dn_steps", a.dn_steps}, {"batch", a.batch}, {"lr", a.lr},
                                  {"T", a.steps_T}, {"seed", a.seed}});
    const datagen::Dataset ds = datagen::load_dataset(a.data);
    backbone::BackboneConfig cfg;
    cfg.autoencoder.image_size = ds.image_size;
    cfg.denoiser.latent_size = ds.image_size / 4;
    const auto sched = diffusion::NoiseSchedule::standard(a.steps_T);
    cfg.schedule = sched.spec();
    cfg.class_names = ds.class_names;
    cfg.style_names = ds.style_names;
    backbone::BackboneBundle bundle(cfg, a.seed);
    const nn::Rng root = nn::Rng(a.seed).substream("train");

    backbone::AutoencoderTrainConfig ac;
    ac.steps = a.ae_steps;
    ac.batch = a.batch;
    ac.lr = a.lr;
    const auto ae = backbone::train_autoencoder(bundle, ds, ac, root.substream("autoencoder"),
                                                progress_printer("autoencoder"));
    std::printf("autoencoder held-out PSNR %.3f dB\n", ae.heldout_psnr);

    backbone::DenoiserTrainConfig dc;
    dc.steps = a.dn_steps;
    dc.batch = a.batch;
    dc.lr = a.lr;
    const auto dn = backbone::train_denoiser(bundle, ds, dc, root.substream("denoiser"), progress_printer("denoiser"));
    std::printf("denoiser held-out loss %.5f (untrained %.5f)\n", dn.heldout_loss_after, dn.heldout_loss_before);

    bundle.freeze();
    bundle.save(a.out);
    auto& r = log.results();
    r["autoencoder_final_loss"] = ae.losses.empty() ? 0.0 : ae.losses.back();
    r["recon_psnr"] = ae.heldout_psnr;
    r["latent_scale"] = ae.latent_scale;
    r["denoiser_final_loss"] = dn.losses.empty() ? 0.0 : dn.losses.back();
    r["denoiser_heldout_loss"] = dn.heldout_loss_after;
    r["denoiser_untrained_heldout_loss"] = dn.heldout_loss_before;
    r["content_digest"] = bundle.content_digest();
    std::cout << "backbone digest " << bundle.content_digest() << " -> " << a.out << '\n';
    log.write(manifest_beside(a.out));
    return 0;
}

// ---- train-judge ---------------------------------------------------------------

struct TrainJudgeArgs {
    std::string data, out;
    std::size_t steps = 1500;
    std::uint64_t seed = 0;
};

int run_train_judge(const TrainJudgeArgs& a) {
    RunLog log("train-judge", {{"data", a.data}, {"out", a.out}, {"steps", a.steps}, {"seed", a.seed}});
    const datagen::Dataset ds = datagen::load_dataset(a.data);
    metrics::JudgeTrainConfig cfg;
    cfg.steps = a.steps;
    metrics::JudgeReport rep;
    const auto judge = metrics::train_judge(ds, cfg, nn::Rng(a.seed).substream("judge"), &rep, progress_printer("judge"));
    judge->save(a.out);
    std::printf("judge held-out accuracy %.4f (gate %.2f)\n", rep.heldout_acc, metrics::kJudgeGate);
    log.results()["heldout_acc"] = rep.heldout_acc;
    log.results()["passes_gate"] = rep.heldout_acc >= metrics::kJudgeGate;
    log.write(manifest_beside(a.out));
    return 0;
}

// ---- train-lctn -----------------------------------------------------------------

struct TrainLctnArgs {
    std::string data, backbone, out;
    std::size_t iters = 20000, warmup = 100, batch = 4;
    double lr = 1e-3;
    std::uint64_t seed = 2;
};

int run_train_lctn(const TrainLctnArgs& a) {
    RunLog log("train-lctn", {{"data", a.data}, {"backbone", a.backbone}, {"out", a.out}, {"iters", a.iters},
                              {"lr", a.lr}, {"warmup", a.warmup}, {"batch", a.batch}, {"seed", a.seed}});
    const datagen::Dataset ds = datagen::load_dataset(a.data);
    const auto bundle = backbone::BackboneBundle::load(a.backbone);
    lctn::LctnTrainConfig cfg;
    cfg.iters = a.iters;
    cfg.lr = a.lr;
    cfg.warmup = a.warmup;
    cfg.batch = a.batch;
    lctn::LctnTrainReport rep;
    const auto model = lctn::train_lctn(*bundle, ds, cfg, nn::Rng(a.seed).substream("lctn"), &rep,
                                        progress_printer("lctn"));
    model->save(a.out);
    const bool unchanged = rep.digest_before == rep.digest_after;
    std::printf("backbone digest before %s after %s: %s\n", rep.digest_before.c_str(), rep.digest_after.c_str(),
                unchanged ? "unchanged" : "CHANGED");
    std::printf("held-out latent MSE %.5f, constant-mean baseline %.5f\n", rep.heldout_mse, rep.baseline_mse);
    auto& r = log.results();
    r["final_loss"] = rep.losses.empty() ? 0.0 : rep.losses.back();
    r["heldout_mse"] = rep.heldout_mse;
    r["baseline_mse"] = rep.baseline_mse;
    r["backbone_digest_before"] = rep.digest_before;
    r["backbone_digest_after"] = rep.digest_after;
    log.write(manifest_beside(a.out));
    if (!unchanged) throw ModelError("backbone digest changed during LCTN training");
    return 0;
}

// ---- sample -----------------------------------------------------------------------

struct SampleArgs {
    std::string backbone, lctn, sketch, class_name, style = "none", mode = "aligned", out;
    double k = pipeline::kDefaultKRatio;
    std::uint64_t seed = 0;
    bool also_direct = false;
};

std::size_t name_index(const std::vector<std::string>& names, const std::string& name, const char* what) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError(std::string("unknown ") + what + " '" + name + "'; valid: " + valid);
}

int run_sample(const SampleArgs& a) {
    RunLog log("sample", {{"backbone", a.backbone}, {"lctn", a.lctn}, {"sketch", a.sketch}, {"class", a.class_name},
                          {"style", a.style}, {"k", a.k}, {"seed", a.seed}, {"mode", a.mode}, {"out", a.out},
                          {"also_direct", a.also_direct}});
    const auto bundle = backbone::BackboneBundle::load(a.backbone);
    const auto model = lctn::LctnModel::load(a.lctn, *bundle);
    const pipeline::Translator tr(*bundle, *model);
    pipeline::SampleConfig cfg;
    cfg.class_id = name_index(bundle->config().class_names, a.class_name, "class");
    if (a.style != "none") cfg.style_id = name_index(bundle->config().style_names, a.style, "style");
    cfg.k_ratio = a.k;
    cfg.seed = a.seed;
    cfg.step_mode = pipeline::step_mode_from_string(a.mode);
    cfg.return_direct_decode = a.also_direct;
    const auto res = tr.translate(read_sketch(a.sketch), cfg);
    io::write_ppm(a.out, res.image);
    auto& r = log.results();
    r["k_used"] = res.k_used;
    r["z0_digest"] = res.z0_digest;
    r["zk_digest"] = res.zk_digest;
    std::cout << "k_used " << res.k_used << " -> " << a.out << '\n';
    if (res.direct) {
        fs::path direct = fs::path(a.out);
        direct.replace_extension(".direct.ppm");
        io::write_ppm(direct, *res.direct);
        r["direct"] = direct.string();
        std::cout << "direct decode -> " << direct.string() << '\n';
    }
    log.write(manifest_beside(a.out));
    return 0;
}

// ---- eval / sweep-k -------------------------------------------------------------------

struct EvalArgs {
    std::string backbone, lctn, data, judge, mode = "aligned", out;
    double k = pipeline::kDefaultKRatio, jitter = 0.0;
    std::uint64_t seed = 0;
    bool direct = false;
    double from = 0.5, to = 0.95;
    std::size_t points = 10;
};

int run_eval(const EvalArgs& a, bool sweep) {
    Json cfg{{"backbone", a.backbone}, {"lctn", a.lctn}, {"data", a.data}, {"judge", a.judge},
             {"seed", a.seed},         {"mode", a.mode}, {"jitter", a.jitter}, {"out", a.out}};
    if (sweep) {
        cfg["from"] = a.from;
        cfg["to"] = a.to;
        cfg["points"] = a.points;
    } else {
        cfg["k"] = a.k;
        cfg["direct"] = a.direct;
    }
    RunLog log(sweep ? "sweep-k" : "eval", cfg);
    const datagen::Dataset ds = datagen::load_dataset(a.data);
    const auto bundle = backbone::BackboneBundle::load(a.backbone);
    const auto model = lctn::LctnModel::load(a.lctn, *bundle);
    const auto judge = judge_for(a.judge, ds);
    const pipeline::Translator tr(*bundle, *model);
    metrics::EvalOptions opt;
    opt.seed = a.seed;
    opt.step_mode = pipeline::step_mode_from_string(a.mode);
    opt.jitter = a.jitter;
    const auto items = ds.select(datagen::Split::test);
    Json out;
    if (sweep) {
        out = metrics::sweep_json(metrics::sweep_k(tr, *judge, items, metrics::linspace(a.from, a.to, a.points), opt));
        std::printf("%8s %4s %8s %8s %8s\n", "k_ratio", "k", "iou", "conf", "acc");
        for (const auto& row : out)
            std::printf("%8.3f %4zu %8.4f %8.4f %8s\n", row["k_ratio"].get<double>(), row["k"].get<std::size_t>(),
                        row["iou"]["mean"].get<double>(), row["confidence"]["mean"].get<double>(),
                        row["acc"].is_null() ? "n/a" : std::to_string(row["acc"].get<double>()).c_str());
    } else {
        opt.k_ratio = a.k;
        opt.direct = a.direct;
        out = metrics::evaluate(tr, *judge, items, opt).to_json();
        std::cout << out.dump(2) << '\n';
    }
    write_json(a.out, out);
    log.results()["judge_heldout_acc"] = judge->heldout_acc;
    log.results()["backbone_digest"] = bundle->content_digest();
    log.write(manifest_beside(a.out));
    return 0;
}

// ---- edge ------------------------------------------------------------------------------

int run_edge(const std::string& in, const std::string& out) {
    RunLog log("edge", {{"in", in}, {"out", out}});
    const nn::Tensor img = io::read_netpbm(in);
    if (img.rank() != 3 || img.dim(0) != 3) throw DataError(in + " is not an RGB (P6) image");
    io::write_pgm(out, datagen::edge_map(img));
    log.write(manifest_beside(out));
    return 0;
}

// ---- serve --------------------------------------------------------------------------------

httplib::Server* g_server = nullptr;

int run_serve(const std::string& host, int port, const std::string& backbone_path, const std::string& lctn_path,
              std::uint64_t seed) {
    RunLog log("serve", {{"host", host}, {"port", port}, {"backbone", backbone_path}, {"lctn", lctn_path},
                         {"seed", seed}});
    service::Service svc(seed);
    auto bundle = backbone::BackboneBundle::load(backbone_path);
    auto model = lctn::LctnModel::load(lctn_path, *bundle);
    svc.load(std::move(bundle), std::move(model));
    httplib::Server server;
    service::register_routes(server, svc);
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
    std::cout << "serving on http://" << host << ':' << port << " (backbone " << svc.loaded_digest() << ")\n";
    std::cout.flush();
    if (!server.listen(host, port)) throw UsageError("cannot listen on " + host + ":" + std::to_string(port));
    g_server = nullptr;
    svc.verify_unchanged();
    std::cout << "shutdown: backbone digest unchanged (" << svc.loaded_digest() << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latsketch: sketch-to-image translation over a frozen latent diffusion backbone"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "Render the synthetic shape dataset");
    gen->add_option("--out", gd.out, "Output directory")->required();
    gen->add_option("--per-class", gd.per_class, "Items per class")->capture_default_str();
    gen->add_option("--seed", gd.seed, "Dataset seed")->capture_default_str();
    gen->add_option("--size", gd.size, "Image side in pixels")->capture_default_str();
    gen->add_flag("--force", gd.force, "Replace an existing dataset in --out");

    TrainBackboneArgs tb;
    auto* tbb = app.add_subcommand("train-backbone", "Train and freeze the autoencoder + denoiser backbone");
    tbb->add_option("--data", tb.data, "Dataset directory")->required();
    tbb->add_option("--out", tb.out, "Output checkpoint")->required();
    tbb->add_option("--ae-steps", tb.ae_steps, "Autoencoder steps")->capture_default_str();
    tbb->add_option("--dn-steps", tb.dn_steps, "Denoiser steps")->capture_default_str();
    tbb->add_option("--batch", tb.batch, "Batch size")->capture_default_str();
    tbb->add_option("--lr", tb.lr, "Adam learning rate")->capture_default_str();
    tbb->add_option("--T", tb.steps_T, "Diffusion steps")->capture_default_str()->check(CLI::Range(2, 1000));
    tbb->add_option("--seed", tb.seed, "Seed")->capture_default_str();

    TrainJudgeArgs tj;
    auto* tjj = app.add_subcommand("train-judge", "Train the judge classifier on real images");
    tjj->add_option("--data", tj.data, "Dataset directory")->required();
    tjj->add_option("--out", tj.out, "Output checkpoint")->required();
    tjj->add_option("--steps", tj.steps, "Training steps")->capture_default_str();
    tjj->add_option("--seed", tj.seed, "Seed")->capture_default_str();

    TrainLctnArgs tl;
    auto* tll = app.add_subcommand("train-lctn", "Train the latent code translation network");
    tll->add_option("--data", tl.data, "Dataset directory")->required();
    tll->add_option("--backbone", tl.backbone, "Backbone checkpoint")->required();
    tll->add_option("--out", tl.out, "Output checkpoint")->required();
    tll->add_option("--iters", tl.iters, "Iterations (minibatches)")->capture_default_str();
    tll->add_option("--lr", tl.lr, "Adam learning rate")->capture_default_str();
    tll->add_option("--warmup", tl.warmup, "Linear warmup steps")->capture_default_str();
    tll->add_option("--batch", tl.batch, "Batch size")->capture_default_str();
    tll->add_option("--seed", tl.seed, "Seed")->capture_default_str();

    SampleArgs sa;
    auto* smp = app.add_subcommand("sample", "Translate one sketch into an image");
    smp->add_option("--backbone", sa.backbone, "Backbone checkpoint")->required();
    smp->add_option("--lctn", sa.lctn, "LCTN checkpoint")->required();
    smp->add_option("--sketch", sa.sketch, "Sketch (P5 PGM, nonzero = stroke)")->required();
    smp->add_option("--class", sa.class_name, "Class name")->required();
    smp->add_option("--style", sa.style, "Style name or 'none'")->capture_default_str();
    smp->add_option("--k", sa.k, "Perturbation level k/T in (0, 1)")->capture_default_str();
    smp->add_option("--seed", sa.seed, "Noise seed")->capture_default_str();
    smp->add_option("--mode", sa.mode, "aligned | paper-literal")->capture_default_str();
    smp->add_option("--out", sa.out, "Output image (P6 PPM)")->required();
    smp->add_flag("--also-direct", sa.also_direct, "Also write the direct decode beside --out");

    EvalArgs ev;
    auto* evc = app.add_subcommand("eval", "Evaluate generations on the test split");
    EvalArgs sw;
    auto* swc = app.add_subcommand("sweep-k", "Sweep k/T over the test split");
    for (auto [cmd, args] : {std::pair{evc, &ev}, std::pair{swc, &sw}}) {
        cmd->add_option("--backbone", args->backbone, "Backbone checkpoint")->required();
        cmd->add_option("--lctn", args->lctn, "LCTN checkpoint")->required();
        cmd->add_option("--data", args->data, "Dataset directory")->required();
        cmd->add_option("--judge", args->judge, "Judge checkpoint (trained on the fly when absent)");
        cmd->add_option("--seed", args->seed, "Seed ladder base")->capture_default_str();
        cmd->add_option("--mode", args->mode, "aligned | paper-literal")->capture_default_str();
        cmd->add_option("--jitter", args->jitter, "Sketch jitter strength in [0, 1]")->capture_default_str();
        cmd->add_option("--out", args->out, "Output JSON")->required();
    }
    evc->add_option("--k", ev.k, "Perturbation level k/T")->capture_default_str();
    evc->add_flag("--direct", ev.direct, "Also score direct decodes");
    swc->add_option("--from", sw.from, "First k/T")->capture_default_str();
    swc->add_option("--to", sw.to, "Last k/T")->capture_default_str();
    swc->add_option("--points", sw.points, "Number of k/T values")->capture_default_str()->check(CLI::PositiveNumber);

    std::string edge_in, edge_out;
    auto* edg = app.add_subcommand("edge", "Extract the edge map of an RGB image");
    edg->add_option("--in", edge_in, "Input image (P6 PPM)")->required();
    edg->add_option("--out", edge_out, "Output edges (P5 PGM)")->required();

    std::string host = "127.0.0.1", sv_backbone, sv_lctn;
    int port = 8080;
    std::uint64_t sv_seed = 0;
    auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
    srv->add_option("--host", host, "Bind address")->capture_default_str();
    srv->add_option("--port", port, "Port")->capture_default_str();
    srv->add_option("--backbone", sv_backbone, "Backbone checkpoint")->required();
    srv->add_option("--lctn", sv_lctn, "LCTN checkpoint")->required();
    srv->add_option("--seed", sv_seed, "Seed for server-drawn request seeds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (*gen) return run_gen_data(gd);
        if (*tbb) return run_train_backbone(tb);
        if (*tjj) return run_train_judge(tj);
        if (*tll) return run_train_lctn(tl);
        if (*smp) return run_sample(sa);
        if (*evc) return run_eval(ev, false);
        if (*swc) return run_eval(sw, true);
        if (*edg) return run_edge(edge_in, edge_out);
        if (*srv) return run_serve(host, port, sv_backbone, sv_lctn, sv_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return static_cast<int>(ExitCode::usage);
}
