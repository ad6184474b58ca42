// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run: trains every stage through the `latsketch`
// binary, then prints one PASS/FAIL line per acceptance criterion.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "latsketch/backbone/bundle.hpp"
#include "latsketch/datagen/dataset.hpp"
#include "latsketch/diffusion/schedule.hpp"
#include "latsketch/io/base64.hpp"
#include "latsketch/io/netpbm.hpp"
#include "latsketch/lctn/lctn.hpp"
#include "latsketch/nn/grad_check.hpp"
#include "latsketch/nn/layers.hpp"
#include "latsketch/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace latsketch;
using nlohmann::json;
using nn::Rng;
using nn::Tensor;

namespace {

struct Options {
    std::string workdir = "acceptance_work";
    std::string cli = LATSKETCH_CLI;
    std::size_t ae_steps = 4000;
    std::size_t dn_steps = 30000;
    std::size_t lctn_iters = 20000;
    std::vector<std::string> expected_failures;
};

struct Verdict {
    std::string name;
    bool pass = false;
    bool expected_failure = false;
};

class Report {
public:
    explicit Report(std::set<std::string> expected) : expected_(std::move(expected)) {}

    void record(const std::string& name, bool pass, const std::string& detail) {
        const bool xfail = !pass && expected_.count(name) > 0;
        std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << (xfail ? " [expected failure]" : "")
                  << std::endl;
        verdicts_.push_back({name, pass, xfail});
    }

    int finish() const {
        std::size_t passed = 0, xfailed = 0, failed = 0;
        for (const Verdict& v : verdicts_) (v.pass ? passed : v.expected_failure ? xfailed : failed) += 1;
        std::cout << "summary: " << passed << " passed, " << failed << " failed, " << xfailed
                  << " expected failures of " << verdicts_.size() << std::endl;
        return failed == 0 ? 0 : 1;
    }

private:
    std::set<std::string> expected_;
    std::vector<Verdict> verdicts_;
};

std::string fmt(const char* f, double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), f, v);
    return buf.data();
}

void stage(const std::string& what) { std::cout << "  .. " << what << std::endl; }

// ---- subprocess helpers --------------------------------------------------------

struct Run {
    int code = -1;
    std::string output;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

/// Runs the CLI with `args` inside `cwd`; the combined output is also kept in `log`.
Run cli(const Options& o, const fs::path& cwd, const std::string& args, const fs::path& log) {
    const std::string cmd = "cd " + quote(cwd.string()) + " && " + quote(o.cli) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.output.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    fs::create_directories(log.parent_path());
    std::ofstream(log, std::ios::binary) << "$ latsketch " << args << "\n" << r.output;
    return r;
}

/// Like cli(), but a nonzero exit aborts the run.
Run cli_ok(const Options& o, const fs::path& cwd, const std::string& args, const fs::path& log) {
    Run r = cli(o, cwd, args, log);
    if (r.code != 0)
        throw std::runtime_error("latsketch " + args + " exited " + std::to_string(r.code) + "; see " + log.string());
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

/// First path differing between two trees, or empty when byte-identical.
std::string tree_diff(const fs::path& a, const fs::path& b) {
    const auto ta = tree(a), tb = tree(b);
    for (const auto& [k, v] : ta) {
        auto it = tb.find(k);
        if (it == tb.end() || it->second != v) return k;
    }
    for (const auto& [k, v] : tb)
        if (!ta.count(k)) return k;
    return {};
}

// ---- diffusion math ---------------------------------------------------------------

void check_diffusion_math(Report& rep) {
    double prod_err = 0.0, trip_err = 0.0, moment_err = 0.0;
    for (std::size_t T : {100u, 1000u}) {
        const auto s = diffusion::NoiseSchedule::standard(T);
        long double prod = 1.0L;
        for (std::size_t t = 1; t <= T; ++t) {
            prod *= 1.0L - static_cast<long double>(s.beta(t));
            prod_err = std::max(prod_err, std::abs(s.alpha_bar(t) - static_cast<double>(prod)));
        }
        Rng rng = Rng(21).substream(T);
        for (std::size_t t = 1; t <= T; ++t) {
            const Tensor x0 = nn::randn({4, 8, 8}, rng), eps = nn::randn({4, 8, 8}, rng);
            const Tensor xt = diffusion::q_sample(x0, t, eps, s);
            trip_err = std::max(trip_err, (diffusion::invert_q_sample(xt, t, eps, s) - x0).max_abs());
        }
    }

    // Stepwise chain vs closed-form marginal, pooled over the elements of x0.
    const auto s = diffusion::NoiseSchedule::standard(100);
    constexpr std::size_t kSamples = 10000;
    Rng rng(22);
    const Tensor x0 = nn::randn({4, 8, 8}, rng) * 2.0;
    const std::size_t n = x0.size();
    for (std::size_t t : {1u, 10u, 40u, 100u}) {
        std::vector<double> m_chain(n, 0), m_closed(n, 0), q_chain(n, 0), q_closed(n, 0);
        Rng chain_rng = rng.substream("chain").substream(t), closed_rng = rng.substream("closed").substream(t);
        for (std::size_t k = 0; k < kSamples; ++k) {
            Tensor x = x0;
            for (std::size_t u = 1; u <= t; ++u) x = diffusion::q_step(x, u, nn::randn(x0.shape(), chain_rng), s);
            const Tensor y = diffusion::q_sample(x0, t, nn::randn(x0.shape(), closed_rng), s);
            for (std::size_t i = 0; i < n; ++i) {
                m_chain[i] += x[i];
                q_chain[i] += x[i] * x[i];
                m_closed[i] += y[i];
                q_closed[i] += y[i] * y[i];
            }
        }
        double dm = 0, second = 0, v_chain = 0, v_closed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = m_chain[i] / kSamples, b = m_closed[i] / kSamples;
            dm += (a - b) * (a - b);
            second += q_closed[i] / kSamples;
            v_chain += q_chain[i] / kSamples - a * a;
            v_closed += q_closed[i] / kSamples - b * b;
        }
        moment_err = std::max({moment_err, std::sqrt(dm / second), std::abs(v_chain - v_closed) / v_closed});
    }
    rep.record("diffusion-math", prod_err < 1e-12 && trip_err < 1e-9 && moment_err < 0.02,
               "alpha_bar product err " + fmt("%.2e", prod_err) + " (< 1e-12), round-trip err " +
                   fmt("%.2e", trip_err) + " (< 1e-9), chain vs marginal moments rel err " +
                   fmt("%.4f", moment_err) + " (< 0.02, 1e4 samples)");
}

void check_posterior_mean(Report& rep) {
    const auto s = diffusion::NoiseSchedule::standard(100);
    Rng rng(23);
    const Tensor x0 = nn::randn({4, 8, 8}, rng), eps = nn::randn({4, 8, 8}, rng);
    const Tensor x1 = diffusion::q_sample(x0, 1, eps, s);
    const double at_one = (diffusion::posterior_mean(x1, 1, eps, s) - diffusion::invert_q_sample(x1, 1, eps, s)).max_abs();
    const std::size_t t = 50;
    const Tensor xt = diffusion::q_sample(x0, t, eps, s);
    const double at_t = (diffusion::posterior_mean(xt, t, eps, s) - diffusion::invert_q_sample(xt, t, eps, s)).max_abs();
    rep.record("posterior-mean", at_one < 1e-9 && at_t > 0.1,
               "|mean - inversion| at t=1 " + fmt("%.2e", at_one) + " (< 1e-9), at t=50 " + fmt("%.3f", at_t) +
                   " (differs)");
}

// ---- gradients -------------------------------------------------------------------

Tensor away_from_zero(const nn::Shape& shape, Rng& rng) {
    Tensor t = nn::randn(shape, rng);
    for (double& v : t.data()) v = (v >= 0 ? 0.1 : -0.1) + v;
    return t;
}

void check_gradients(Report& rep) {
    constexpr double kStep = 1e-5;
    Rng rng(24);
    double worst = 0.0;
    std::string worst_at;
    std::size_t checked = 0;
    auto note = [&](const nn::GradCheckResult& r, const std::string& what) {
        checked += r.checked;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_at = what + ":" + r.worst;
        }
    };
    auto layer = [&](nn::Layer& l, const Tensor& x) {
        const Tensor probe = l.infer(x);
        note(nn::grad_check(l, x, nn::weighted_sum_loss(nn::randn(probe.shape(), rng)), kStep, rng, 24), l.name());
    };

    nn::Linear fc("linear", 5, 4, rng);
    fc.bias.value = nn::randn({4}, rng);
    layer(fc, nn::randn({3, 5}, rng));
    nn::Conv2d c1("conv_s1", 2, 3, 1, true, rng);
    layer(c1, nn::randn({2, 2, 5, 5}, rng));
    nn::Conv2d c2("conv_s2", 2, 3, 2, false, rng);
    layer(c2, nn::randn({2, 2, 6, 5}, rng));
    nn::ReLU act("relu");
    layer(act, away_from_zero({4, 6}, rng));
    nn::BatchNorm bn("batchnorm", 3);
    bn.gamma.value = Tensor({3}, {0.5, 1.5, -1.0});
    bn.beta.value = nn::randn({3}, rng);
    layer(bn, nn::randn({6, 3}, rng) * 2.0);
    nn::GroupNorm gn("groupnorm", 4, 2);
    gn.gamma.value = nn::randn({4}, rng);
    gn.beta.value = nn::randn({4}, rng);
    layer(gn, nn::randn({2, 4, 3, 3}, rng));
    nn::BilinearResize up("resize_up", 6, 5);
    layer(up, nn::randn({2, 2, 3, 2}, rng));
    nn::BilinearResize down("resize_down", 2, 3);
    layer(down, nn::randn({1, 2, 5, 7}, rng));
    nn::Embedding emb("embedding", 4, 3, rng, 0.5);
    layer(emb, Tensor({5}, {0, 3, 1, 3, 2}));

    // Full LCTN stack, parameters and feature input, in train mode.
    lctn::LctnModel m(12, 4, rng);
    for (nn::Param* p : m.params())
        if (p->name.ends_with(".bn.gamma"))
            p->value = Tensor(p->value.shape(), 1.0) + nn::randn(p->value.shape(), rng) * 0.2;
    Tensor f = nn::randn({2, 12, 2, 3}, rng);
    const Tensor w = nn::randn({2, 4, 2, 3}, rng);
    Tensor df;
    auto params = m.params();
    auto loss = [&] {
        const Tensor y = m.forward(f, nn::Mode::train);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
        return s;
    };
    auto backprop = [&] {
        nn::zero_grads(params);
        m.forward(f, nn::Mode::train);
        df = m.backward(w);
    };
    std::vector<nn::GradProbe> probes;
    for (nn::Param* p : params) probes.push_back({p->name, &p->value, &p->grad});
    probes.push_back({"features", &f, &df});
    note(nn::grad_check(loss, backprop, probes, kStep, rng, 24), "lctn");

    rep.record("gradient-fidelity", worst < 1e-4,
               "max rel err " + fmt("%.2e", worst) + " (< 1e-4) over " + std::to_string(checked) +
                   " entries of 9 layer configurations and the LCTN stack, worst at " + worst_at);
}

// ---- service determinism --------------------------------------------------------

// Port the kernel reports free; the probe socket is closed before returning.
int free_port() {
    const int fd = socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return 0;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    int port = 0;
    if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 &&
        getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port = ntohs(addr.sin_port);
    close(fd);
    return port;
}

struct ServeRun {
    std::vector<std::string> bodies;
    bool clean_shutdown = false;
};

ServeRun serve_and_query(const Options& o, const fs::path& dir, const fs::path& log, const std::vector<json>& requests) {
    ServeRun out;
    const int port = free_port();
    if (port <= 0) return out;
    const pid_t pid = fork();
    if (pid < 0) return out;
    if (pid == 0) {
        const std::string port_s = std::to_string(port);
        if (chdir(dir.c_str()) != 0) _exit(126);
        std::FILE* f = std::freopen(log.c_str(), "w", stdout);
        (void)f;
        execl(o.cli.c_str(), o.cli.c_str(), "serve", "--port", port_s.c_str(), "--seed", "5", "--backbone",
              "backbone.dsk", "--lctn", "lctn.dsk", static_cast<char*>(nullptr));
        _exit(127);
    }
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);
    httplib::Result health;
    for (int attempt = 0; attempt < 300 && !health; ++attempt) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        health = client.Get("/api/health");
    }
    if (health)
        for (const json& req : requests) {
            auto res = client.Post("/api/sample", req.dump(), "application/json");
            if (!res) {
                out.bodies.push_back("no response");
                continue;
            }
            // Wall-clock timings are the only field allowed to differ.
            json body = json::parse(res->body, nullptr, false);
            if (body.is_object()) body.erase("timings_ms");
            out.bodies.push_back(std::to_string(res->status) + " " + body.dump());
        }
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    out.clean_shutdown = health && WIFEXITED(status) && WEXITSTATUS(status) == 0 &&
                         slurp(log).find("shutdown: backbone digest unchanged") != std::string::npos;
    return out;
}

// ---- main run -----------------------------------------------------------------------

int run(const Options& o) {
    Report rep(std::set<std::string>(o.expected_failures.begin(), o.expected_failures.end()));
    const fs::path work = fs::absolute(o.workdir);
    const fs::path logs = work / "logs";
    for (const char* sub : {"data", "data_rerun", "toy", "logs", "models", "eval"}) fs::remove_all(work / sub);
    fs::create_directories(logs);
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return fmt("%.0fs", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };

    check_diffusion_math(rep);
    check_posterior_mean(rep);
    check_gradients(rep);

    // Dataset, generated twice.
    stage("gen-data x2 " + elapsed());
    cli_ok(o, work, "gen-data --out data", logs / "gen-data.log");
    cli_ok(o, work, "gen-data --out data_rerun", logs / "gen-data-rerun.log");
    fs::remove(work / "data" / "run.json");
    fs::remove(work / "data_rerun" / "run.json");
    const std::string data_diff = tree_diff(work / "data", work / "data_rerun");

    // Models.
    fs::create_directories(work / "models");
    const fs::path models = work / "models";
    stage("train-backbone " + elapsed());
    cli_ok(o, models,
           "train-backbone --data ../data --out backbone.dsk --ae-steps " + std::to_string(o.ae_steps) +
               " --dn-steps " + std::to_string(o.dn_steps),
           logs / "train-backbone.log");
    const std::string bb_bytes = slurp(models / "backbone.dsk");
    stage("train-lctn " + elapsed());
    cli_ok(o, models, "train-lctn --data ../data --backbone backbone.dsk --out lctn.dsk --iters " +
                          std::to_string(o.lctn_iters),
           logs / "train-lctn.log");
    stage("train-judge " + elapsed());
    cli_ok(o, models, "train-judge --data ../data --out judge.dsk", logs / "train-judge.log");

    const json bb_run = read_json(models / "backbone.dsk.run.json");
    const json lctn_run = read_json(models / "lctn.dsk.run.json");
    const json judge_run = read_json(models / "judge.dsk.run.json");
    const std::string trained_digest = bb_run["results"]["content_digest"];
    const std::string before = lctn_run["results"]["backbone_digest_before"];
    const std::string after = lctn_run["results"]["backbone_digest_after"];
    const auto reloaded = backbone::BackboneBundle::load(models / "backbone.dsk");
    const bool file_same = slurp(models / "backbone.dsk") == bb_bytes;
    rep.record("no-retraining",
               before == after && before == trained_digest && reloaded->content_digest() == trained_digest &&
                   reloaded->compute_digest() == trained_digest && file_same,
               "backbone digest " + before + " before, " + after + " after " + std::to_string(o.lctn_iters) +
                   " LCTN iterations; checkpoint file " + (file_same ? "unchanged" : "CHANGED"));

    const double mse = lctn_run["results"]["heldout_mse"], base = lctn_run["results"]["baseline_mse"];
    rep.record("lctn-learns", mse <= 0.5 * base,
               "held-out latent MSE " + fmt("%.4f", mse) + " vs constant-mean baseline " + fmt("%.4f", base) +
                   " (ratio " + fmt("%.3f", mse / base) + ", <= 0.5)");

    // Evaluations on the test split.
    fs::create_directories(work / "eval");
    const fs::path ev = work / "eval";
    const std::string model_args = " --backbone ../models/backbone.dsk --lctn ../models/lctn.dsk --data ../data "
                                   "--judge ../models/judge.dsk";
    stage("sweep-k " + elapsed());
    cli_ok(o, ev, "sweep-k" + model_args + " --out sweep.json", logs / "sweep-k.log");
    stage("eval k/T 0.8 with direct decodes " + elapsed());
    cli_ok(o, ev, "eval" + model_args + " --k 0.8 --direct --out eval.json", logs / "eval.json.log");
    stage("eval k/T 0.8 with jittered sketches " + elapsed());
    cli_ok(o, ev, "eval" + model_args + " --k 0.8 --jitter 0.5 --out eval_jitter.json", logs / "eval-jitter.log");

    const json sweep = read_json(ev / "sweep.json");
    std::cout << "  sweep over the test split (" << sweep.at(0)["iou"]["n"] << " sketches)\n";
    std::cout << "  " << std::string(50, '-') << '\n';
    std::printf("  %8s %4s %8s %8s %8s %8s\n", "k/T", "k", "iou", "ssim", "conf", "acc");
    double iou_lo = NAN, iou_hi = NAN;
    for (const auto& row : sweep) {
        const double r = row["k_ratio"], iou = row["iou"]["mean"];
        std::printf("  %8.3f %4zu %8.4f %8.4f %8.4f %8s\n", r, row["k"].get<std::size_t>(), iou,
                    row["ssim"]["mean"].get<double>(), row["confidence"]["mean"].get<double>(),
                    row["acc"].is_null() ? "n/a" : fmt("%.4f", row["acc"].get<double>()).c_str());
        if (std::abs(r - 0.5) < 1e-9) iou_lo = iou;
        if (std::abs(r - 0.95) < 1e-9) iou_hi = iou;
    }
    std::cout.flush();
    const std::size_t sweep_n = sweep.at(0)["iou"]["n"];
    rep.record("k-tradeoff", sweep_n >= 50 && iou_lo > iou_hi,
               "mean silhouette IoU " + fmt("%.4f", iou_lo) + " at k/T=0.5 vs " + fmt("%.4f", iou_hi) +
                   " at k/T=0.95 over " + std::to_string(sweep_n) + " held-out sketches");

    const json e = read_json(ev / "eval.json");
    const double judge_acc = judge_run["results"]["heldout_acc"];
    const datagen::DatasetSpec spec = datagen::default_spec();
    double circle_hits = 0, circle_n = 0;
    std::string circle_detail;
    if (e["judge_valid"] == true)
        for (const auto& c : e["per_class_acc"])
            for (const auto& cs : spec.classes)
                if (cs.name == c["class"] && cs.silhouette == datagen::Silhouette::circle) {
                    circle_hits += c["acc"].get<double>() * c["n"].get<double>();
                    circle_n += c["n"].get<double>();
                    circle_detail += " " + cs.name + " " + fmt("%.2f", c["acc"].get<double>());
                }
    const double circle_acc = circle_n > 0 ? circle_hits / circle_n : 0.0;
    const double overall = e["acc"].is_null() ? 0.0 : e["acc"].get<double>();
    rep.record("ambiguous-classes", judge_acc >= 0.95 && circle_acc >= 0.6 && overall >= 0.7,
               "judge real-image ACC " + fmt("%.4f", judge_acc) + " (>= 0.95); generated ACC at k/T=0.8: circle " +
                   fmt("%.4f", circle_acc) + " (>= 0.6;" + circle_detail + "), overall " + fmt("%.4f", overall) +
                   " (>= 0.7)");

    const double direct_conf = e["direct"]["confidence"]["mean"], pipe_conf = e["confidence"]["mean"];
    rep.record("direct-decode-contrast", direct_conf < pipe_conf,
               "mean judge confidence " + fmt("%.4f", direct_conf) + " on direct decodes vs " + fmt("%.4f", pipe_conf) +
                   " on pipeline outputs (" + std::to_string(e["n"].get<std::size_t>()) + " test sketches)");

    const json ej = read_json(ev / "eval_jitter.json");
    const double jitter_acc = ej["acc"].is_null() ? 0.0 : ej["acc"].get<double>();
    rep.record("sketch-generalization", !e["acc"].is_null() && overall - jitter_acc <= 0.15,
               "generated ACC " + fmt("%.4f", overall) + " clean vs " + fmt("%.4f", jitter_acc) +
                   " with jitter 0.5 (loss " + fmt("%.4f", overall - jitter_acc) + ", <= 0.15)");

    // Determinism: every command twice at toy scale from relative paths, so
    // whole output trees (run manifests included) must match byte for byte.
    stage("determinism " + elapsed());
    std::vector<std::string> mismatches;
    if (!data_diff.empty()) mismatches.push_back("dataset regeneration (" + data_diff + ")");
    const std::vector<std::pair<std::string, std::string>> toy = {
        {"gen-data", "gen-data --per-class 10 --seed 3 --out data"},
        {"train-backbone", "train-backbone --data data --out bb.dsk --ae-steps 20 --dn-steps 20 --batch 4 --T 25"},
        {"train-lctn", "train-lctn --data data --backbone bb.dsk --out lctn.dsk --iters 12 --warmup 3"},
        {"train-judge", "train-judge --data data --out judge.dsk --steps 15"},
        {"sample", "sample --backbone bb.dsk --lctn lctn.dsk --sketch data/edge/000003.pgm --class basketball "
                   "--style night --k 0.6 --seed 9 --also-direct --out sample.ppm"},
        {"eval", "eval --backbone bb.dsk --lctn lctn.dsk --data data --judge judge.dsk --direct --out eval.json"},
        {"sweep-k", "sweep-k --backbone bb.dsk --lctn lctn.dsk --data data --judge judge.dsk --points 3 "
                    "--out sweep.json"},
        {"edge", "edge --in data/img/000005.ppm --out edge.pgm"},
    };
    for (const char* r : {"a", "b"}) {
        fs::create_directories(work / "toy" / r);
        for (const auto& [name, args] : toy)
            cli_ok(o, work / "toy" / r, args, logs / "toy" / (std::string(r) + "-" + name + ".log"));
    }
    if (const std::string d = tree_diff(work / "toy" / "a", work / "toy" / "b"); !d.empty())
        mismatches.push_back("toy CLI outputs (" + d + ")");

    // Full-scale sample command and in-process pipeline call on the trained models.
    const std::string sample_args =
        "sample --backbone backbone.dsk --lctn lctn.dsk --sketch ../data/edge/000019.pgm --class soccer --seed 17 ";
    cli_ok(o, models, sample_args + "--out s1.ppm", logs / "sample-1.log");
    cli_ok(o, models, sample_args + "--out s2.ppm", logs / "sample-2.log");
    if (slurp(models / "s1.ppm") != slurp(models / "s2.ppm")) mismatches.push_back("full-scale sample");
    const auto model = lctn::LctnModel::load(models / "lctn.dsk", *reloaded);
    const pipeline::Translator tr(*reloaded, *model);
    Tensor sketch = io::read_netpbm(work / "data" / "edge" / "000019.pgm");
    for (double& v : sketch.data()) v = v > 0.0 ? 1.0 : 0.0;
    pipeline::SampleConfig sc;
    sc.seed = 17;
    sc.class_id = spec.classes.size();
    for (std::size_t c = 0; c < spec.classes.size(); ++c)
        if (spec.classes[c].name == "soccer") sc.class_id = c;
    const Tensor p1 = tr.translate(sketch, sc).image, p2 = tr.translate(sketch, sc).image;
    if (p1.storage() != p2.storage()) mismatches.push_back("pipeline call");
    if (io::read_netpbm(models / "s1.ppm").storage() != io::from_bytes(io::to_bytes(p1), 3, 32, 32).storage())
        mismatches.push_back("CLI sample vs pipeline call");

    // serve: two server processes with the same --seed answer identically,
    // including server-drawn seeds.
    std::vector<std::uint8_t> sk;
    for (double v : sketch.data()) sk.push_back(v > 0.5 ? 255 : 0);
    json req{{"sketch", io::base64_encode(sk)}, {"width", 32}, {"height", 32}, {"class_id", sc.class_id},
             {"style_id", nullptr}, {"k_ratio", 0.8}, {"seed", nullptr}, {"step_mode", "aligned"},
             {"include_direct", true}};
    json fixed = req;
    fixed["seed"] = 17;
    const ServeRun s1 = serve_and_query(o, models, logs / "serve-1.log", {req, req, fixed});
    const ServeRun s2 = serve_and_query(o, models, logs / "serve-2.log", {req, req, fixed});
    if (!s1.clean_shutdown || !s2.clean_shutdown || s1.bodies.size() != 3 || s1.bodies != s2.bodies ||
        s1.bodies[0].rfind("200 ", 0) != 0)
        mismatches.push_back("serve");

    std::string detail = "gen-data (full dataset byte-identical), ";
    for (const auto& [name, args] : toy) detail += name + ", ";
    detail += "serve, full-scale sample and in-process pipeline call repeated";
    if (!mismatches.empty()) {
        detail += "; mismatches:";
        for (const auto& m : mismatches) detail += " " + m;
    }
    rep.record("determinism", mismatches.empty(), detail);

    std::cout << "  total " << elapsed() << "; artifacts and logs in " << work.string() << std::endl;
    return rep.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latsketch acceptance run"};
    Options o;
    app.add_option("--workdir", o.workdir, "Directory for artifacts and logs")->capture_default_str();
    app.add_option("--cli", o.cli, "Path to the latsketch binary")->capture_default_str();
    app.add_option("--ae-steps", o.ae_steps, "Autoencoder training steps")->capture_default_str();
    app.add_option("--dn-steps", o.dn_steps, "Denoiser training steps")->capture_default_str();
    app.add_option("--lctn-iters", o.lctn_iters, "LCTN iterations")->capture_default_str();
    app.add_option("--expected-failure", o.expected_failures,
                   "Criterion whose FAIL is reported but does not fail the run");
    CLI11_PARSE(app, argc, argv);
    try {
        return run(o);
    } catch (const std::exception& e) {
        std::cerr << "acceptance run aborted: " << e.what() << std::endl;
        return 2;
    }
}
