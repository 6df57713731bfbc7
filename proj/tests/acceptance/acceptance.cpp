// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <torch/torch.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "scanet/agn.hpp"
#include "scanet/attention_target.hpp"
#include "scanet/curriculum.hpp"
#include "scanet/deform_conv.hpp"
#include "scanet/losses.hpp"
#include "scanet/metrics.hpp"
#include "scanet/model.hpp"
#include "scanet/runtime.hpp"
#include "scanet/srn.hpp"
#include "scanet/synthdata.hpp"
#include "scanet/trainer.hpp"
#include "test_util.hpp"

using namespace scanet;
namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects named checks; the first few failures are kept for the report.
struct Checks {
    int total = 0;
    std::vector<std::string> failed;

    void near(const std::string& name, double got, double want, double tol) {
        ++total;
        if (!(std::abs(got - want) <= tol)) failed.push_back(name + " got " + fmt("%.9g", got));
    }
    void below(const std::string& name, double got, double limit) {
        ++total;
        if (!(got < limit)) failed.push_back(name + " " + fmt("%.3g", got));
    }
    void truth(const std::string& name, bool v) {
        ++total;
        if (!v) failed.push_back(name);
    }
    bool ok() const { return failed.empty(); }
    std::string summary() const {
        std::string s = std::to_string(total - static_cast<int>(failed.size())) + "/" + std::to_string(total) +
                        " checks";
        for (std::size_t i = 0; i < failed.size() && i < 4; ++i) s += "; failed " + failed[i];
        return s;
    }
};

double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

// ---- 1 ----------------------------------------------------------------------

Outcome formula_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-6;
    Checks c;

    Image black(4, 4, 0.f), white(4, 4, 1.f);
    Image rnd(4, 4);
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (auto& v : rnd.data) v = u(rng);
    {
        const auto i = apply_haze(black, Plane(4, 4, 0.25f), 1.0f);
        for (float v : i.data) c.near("haze J=0 A=1 t=0.25", v, 0.75, tol);
        const auto same = apply_haze(rnd, Plane(4, 4, 1.0f), 0.7f);
        for (std::size_t k = 0; k < same.data.size(); ++k) c.near("haze t=1", same.data[k], rnd.data[k], tol);
        for (float v : apply_haze(rnd, Plane(4, 4, 0.0f), 1.0f).data) c.near("haze t=0 A=1", v, 1.0, tol);
    }
    {
        Image green(2, 2, 0.f);
        for (auto& v : green.channel(1)) v = 1.f;
        c.near("Y black", rgb_to_y(black).data[0], 0.0, tol);
        c.near("Y white", rgb_to_y(white).data[0], 1.0, tol);
        c.near("Y green", rgb_to_y(green).data[0], 0.587, tol);
        for (float v : attention_target(rnd, rnd).values.data) c.near("M_GT equal", v, 0.0, tol);
        for (float v : attention_target(white, black).values.data) c.near("M_GT white/black", v, 1.0, tol);
        for (float v : attention_target(Image(3, 3, 0.75f), Image(3, 3, 0.25f)).values.data)
            c.near("M_GT gray", v, 0.5, tol);
    }
    c.near("lambda(0.2)", lambda_schedule(0.2, 0.1), 0.0, tol);
    c.near("lambda(0.05)", lambda_schedule(0.05, 0.1), 1.0, tol);
    c.near("lambda(0.075)", lambda_schedule(0.075, 0.1), 0.5, tol);
    c.near("lambda after warmup", lambda_schedule(0.5, 0.3), 1.0, tol);
    {
        const auto g = torch::rand({1, 1, 6, 6}), t = torch::rand({1, 1, 6, 6});
        c.near("blend lambda=0", max_abs(blend_attention(g, t, 0.0) - t), 0.0, tol);
        c.near("blend lambda=1", max_abs(blend_attention(g, t, 1.0) - g), 0.0, tol);
        c.near("blend midpoint",
               max_abs(blend_attention(torch::full({1, 1, 3, 3}, 0.2), torch::full({1, 1, 3, 3}, 0.8), 0.5) - 0.5),
               0.0, tol);
        const auto f = torch::randn({1, 4, 6, 6}), m = torch::rand({1, 1, 6, 6});
        c.near("attention alpha=0", max_abs(apply_attention(f, m, torch::zeros({1})) - f), 0.0, tol);
        c.near("attention M=1", max_abs(apply_attention(f, torch::ones({1, 1, 6, 6}), torch::full({1}, 0.3)) - f), 0.0,
               tol);
        c.near("attention M=0 alpha=1", max_abs(apply_attention(f, torch::zeros({1, 1, 6, 6}), torch::ones({1}))), 0.0,
               tol);
    }
    {
        const auto z = torch::zeros({1, 3, 4, 4});
        c.near("smooth L1 equal", smooth_l1(z, z).item<double>(), 0.0, tol);
        c.near("smooth L1 0.5", smooth_l1(z + 0.5, z).item<double>(), 0.125, tol);
        c.near("smooth L1 2.0", smooth_l1(z + 2.0, z).item<double>(), 1.5, tol);
        c.near("joint zeros", joint_loss(LossReport{}).joint, 0.0, tol);
        c.near("joint ones", joint_loss(LossReport{1, 1, 1, 1, 1, 0}).joint, 1.8105, tol);
        c.near("adversarial D=1", adversarial_loss(torch::ones({4})).item<double>(), 0.0, tol);
        c.near("adversarial D=1/e", adversarial_loss(torch::full({1}, std::exp(-1.0), torch::kDouble)).item<double>(),
               1.0, tol);
        c.near("adversarial D=0.5", adversarial_loss(torch::full({1}, 0.5, torch::kDouble)).item<double>(),
               std::log(2.0), tol);
    }
    const double secs = seconds_since(t0);
    c.below("runtime", secs, 10.0);
    return {c.ok(), c.summary() + ", " + fmt("%.2f s", secs)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome gradient_suite() {
    using testing::grad_rel_error;
    using testing::param_grad_rel_error;
    const auto t0 = std::chrono::steady_clock::now();
    torch::manual_seed(2);
    const auto D = torch::kDouble;
    std::map<std::string, double> err;

    {
        DualAttentionUnit dau(DAUConfig{});
        dau->to(D);
        const auto x = torch::randn({1, 16, 4, 4}, D);
        err["DAU input"] = grad_rel_error([&](const std::vector<torch::Tensor>& in) { return dau->forward(in[0]).sum(); },
                                          {x}, 0);
        err["DAU params"] = param_grad_rel_error(*dau, [&] { return dau->forward(x).sum(); });
    }
    {
        const auto x = torch::randn({1, 3, 5, 5}, D);
        const auto sign = torch::randint(0, 2, {1, 18, 5, 5}).mul(2).sub(1).to(D);
        const auto off = (torch::rand({1, 18, 5, 5}, D) * 0.6 + 0.2) * sign;
        const auto w = torch::randn({2, 3, 3, 3}, D), b = torch::randn({2}, D);
        const auto proj = torch::randn({1, 2, 5, 5}, D);
        auto f = [&](const std::vector<torch::Tensor>& in) { return (deform_conv2d(in[0], in[1], in[2], in[3]) * proj).sum(); };
        const char* names[] = {"deform input", "deform offsets", "deform weight", "deform bias"};
        for (std::size_t i = 0; i < 4; ++i) err[names[i]] = grad_rel_error(f, {x, off, w, b}, i);
    }
    {
        SRNConfig cfg;
        cfg.stem_channels = 4;
        cfg.mid_channels = 4;
        cfg.base_channels = 4;
        cfg.n_res_blocks = 1;
        SceneReconstruction srn(cfg);
        srn->to(D);
        const auto feat = torch::randn({1, 4, 8, 8}, D) * 0.3;
        const auto proj = torch::randn({1, 3, 8, 8}, D);
        err["SRN tail input"] = grad_rel_error(
            [&](const std::vector<torch::Tensor>& in) { return (srn->tail_block(in[0]) * proj).sum(); }, {feat}, 0);
        err["SRN tail params"] = param_grad_rel_error(*srn->tail, [&] { return (srn->tail_block(feat) * proj).sum(); });
    }
    {
        const auto p = torch::rand({1, 3, 8, 8}, D), t = torch::rand({1, 3, 8, 8}, D);
        auto sl1 = [](const std::vector<torch::Tensor>& in) { return smooth_l1(in[0], in[1]); };
        err["L_sl1"] = grad_rel_error(sl1, {p * 3, t}, 0);
        err["L^a_sl1"] = grad_rel_error(sl1, {torch::rand({1, 1, 8, 8}, D), torch::rand({1, 1, 8, 8}, D)}, 0);

        FeatureExtractorConfig fc;
        fc.width1 = fc.width2 = fc.width3 = 4;
        FeatureExtractor ex(fc);
        ex->to(D);
        err["L_p"] = grad_rel_error(
            [&](const std::vector<torch::Tensor>& in) { return perceptual_loss(in[0], in[1], *ex); }, {p, t}, 0);

        SsimOptions o;
        o.window = 3;
        err["L_MS-SSIM"] = grad_rel_error(
            [&](const std::vector<torch::Tensor>& in) { return ms_ssim_loss(in[0], in[1], 2, o); }, {0.7 * p + 0.3 * t, p},
            0);

        DiscriminatorConfig dc;
        dc.widths = {4, 4, 4};
        PatchDiscriminator d(dc);
        d->to(D);
        err["L_a"] = grad_rel_error(
            [&](const std::vector<torch::Tensor>& in) { return adversarial_loss(in[0] - in[1], *d); }, {p, t}, 0);
    }

    const double secs = seconds_since(t0);
    bool ok = secs < 120.0;
    double worst = -1;
    std::string worst_name, bad;
    for (const auto& [k, v] : err) {
        if (!(v < 1e-3)) {
            ok = false;
            bad += "; " + k + " " + fmt("%.3g", v);
        }
        if (v > worst) {
            worst = v;
            worst_name = k;
        }
    }
    return {ok, std::to_string(err.size()) + " gradients, worst rel. err " + fmt("%.2e", worst) + " (" + worst_name +
                    ")" + bad + ", " + fmt("%.1f s", secs)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome zero_offset_deform() {
    int passed = 0;
    double worst = 0;
    for (int seed = 0; seed < 20; ++seed) {
        torch::manual_seed(seed);
        const auto x = torch::randn({1, 8, 16, 16});
        const auto w = torch::randn({8, 8, 3, 3}), b = torch::randn({8});
        const auto ref = F::conv2d(x, w, F::Conv2dFuncOptions().bias(b).padding(1));
        const double d = max_abs(deform_conv2d(x, torch::zeros({1, 18, 16, 16}), w, b) - ref);
        worst = std::max(worst, d);
        if (d <= 1e-5) ++passed;
    }
    return {passed == 20, std::to_string(passed) + "/20 seeds, max |diff| " + fmt("%.2e", worst)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome budget_check() {
    const auto t0 = std::chrono::steady_clock::now();
    Generator g(ModelConfig{});
    const auto b = estimate_budget(*g, 1200, 1600);
    const double params = static_cast<double>(count_parameters(*g));
    const double flops = static_cast<double>(b.flops);
    const bool p_ok = std::abs(params / 2.39e6 - 1.0) <= 0.15;
    const bool f_ok = std::abs(flops / 258.63e9 - 1.0) <= 0.20;
    const double secs = seconds_since(t0);
    std::string d = "params " + fmt("%.4gM", params / 1e6) + (p_ok ? " (within 15% of 2.39M)" : " (outside 15% of 2.39M)") +
                    ", FLOPs@1200x1600 " + fmt("%.4gG", flops / 1e9) +
                    (f_ok ? " (within 20% of 258.63G)" : " (outside 20% of 258.63G)") + ", MACs " +
                    fmt("%.4gG", static_cast<double>(b.macs) / 1e9) + ", " + fmt("%.1f s", secs);
    return {p_ok && f_ok && secs < 30.0, d};
}

// ---- 5 and 7 ------------------------------------------------------------------

struct AblationRun {
    int row = 0;
    std::uint64_t seed = 0;
    double train_psnr = 0;
    std::vector<StepLog> log;
};

RunConfig ablation_config(const fs::path& data, int row, std::uint64_t seed) {
    RunConfig c;
    c.name = "row" + std::to_string(row) + "_seed" + std::to_string(seed);
    c.data = data;
    c.train.flags = ablation_preset(row);
    c.train.epochs = 40;
    c.train.patch = 64;
    c.train.stride = 64;
    c.train.scales = {1.0};
    c.train.seed = seed;
    return resolve(c);
}

AblationRun run_ablation(const fs::path& data, int row, std::uint64_t seed) {
    TrainOptions opts;
    opts.write_files = false;
    auto r = train(ablation_config(data, row, seed), opts);
    AblationRun out{row, seed, 0, std::move(r.log)};
    out.train_psnr = evaluate_pairs(*r.model, load_dataset(data)).psnr_dehazed;
    return out;
}

Outcome curriculum_property(const AblationRun& run, int64_t epochs) {
    if (run.log.empty()) return {false, "no steps logged"};
    int64_t after = 0, after_bad = 0, pairs = 0, pair_bad = 0, warm_steps = 0;
    std::map<int64_t, std::vector<const StepLog*>> warm;
    for (const auto& s : run.log) {
        // warm-up window: epoch_fraction (e+1)/E <= 0.25
        if (s.epoch >= epochs / 4) {
            ++after;
            if (s.lambda != 1.0) ++after_bad;
        } else {
            warm[s.epoch].push_back(&s);
            ++warm_steps;
        }
    }
    int64_t ramp_steps = 0;
    for (const auto& [e, steps] : warm) {
        for (const auto* a : steps) {
            if (a->lambda > 0.0 && a->lambda < 1.0) ++ramp_steps;
            for (const auto* b : steps) {
                if (!(a->losses.sl1_a < b->losses.sl1_a)) continue;
                ++pairs;
                if (a->lambda < b->lambda) ++pair_bad;
            }
        }
    }
    const bool ok = after > 0 && after_bad == 0 && pair_bad == 0 && warm_steps > 0;
    return {ok, std::to_string(after - after_bad) + "/" + std::to_string(after) + " post-warmup steps with lambda=1, " +
                    std::to_string(pairs - pair_bad) + "/" + std::to_string(pairs) +
                    " same-epoch warmup pairs ordered, " + std::to_string(ramp_steps) + " of " +
                    std::to_string(warm_steps) + " warmup steps on the ramp"};
}

Outcome ablation_direction(const std::vector<AblationRun>& runs) {
    std::map<std::uint64_t, std::map<int, double>> by_seed;
    for (const auto& r : runs) by_seed[r.seed][r.row] = r.train_psnr;
    int wins = 0;
    std::string d;
    for (const auto& [seed, rows] : by_seed) {
        const double r1 = rows.at(1), r4 = rows.at(4);
        if (r4 >= r1) ++wins;
        d += "seed " + std::to_string(seed) + ": (4) " + fmt("%.2f", r4) + " vs (1) " + fmt("%.2f", r1) + " dB; ";
    }
    return {wins * 2 > static_cast<int>(by_seed.size()),
            d + std::to_string(wins) + "/" + std::to_string(by_seed.size()) + " seeds favour (4)"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome overfit_smoke(const fs::path& root) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = root / "smoke";
    generate_dataset(4, 128, data, 7);
    RunConfig c;
    c.name = "smoke";
    c.data = data;
    c.run_root = root / "runs";
    c.train.scales = {1.0};
    c.train.epochs = 250;  // 4 patches, batch 2: 500 steps
    c.train.seed = 7;
    TrainOptions opts;
    opts.write_files = false;
    auto r = train(c, opts);
    const auto ev = evaluate_pairs(*r.model, load_dataset(data));
    auto mean_joint = [&](std::size_t from, std::size_t n) {
        double s = 0;
        for (std::size_t i = from; i < from + n; ++i) s += r.log[i].losses.joint;
        return s / static_cast<double>(n);
    };
    const std::size_t n = std::min<std::size_t>(5, r.log.size());
    const double j0 = mean_joint(0, n), j1 = mean_joint(r.log.size() - n, n);
    const double gain = ev.psnr_dehazed - ev.psnr_hazy;
    const double secs = seconds_since(t0);
    const bool ok = r.steps == 500 && gain >= 3.0 && j1 < 0.5 * j0 && secs < 900;
    return {ok, std::to_string(r.steps) + " steps, PSNR hazy " + fmt("%.2f", ev.psnr_hazy) + " -> dehazed " +
                    fmt("%.2f", ev.psnr_dehazed) + " dB (gain " + fmt("%.2f", gain) + "), joint " + fmt("%.4f", j0) +
                    " -> " + fmt("%.4f", j1) + " (ratio " + fmt("%.3f", j1 / j0) + "), " + fmt("%.0f s", secs)};
}

// ---- 8 ----------------------------------------------------------------------

testing::Raster raster(const Plane& p) {
    testing::Raster r{static_cast<int>(p.height), static_cast<int>(p.width), {}};
    r.v.assign(p.data.begin(), p.data.end());
    return r;
}

Outcome metric_oracle() {
    Checks c;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(0.f, 1.f), n(-0.25f, 0.25f);
    for (int i = 0; i < 5; ++i) {
        Plane a(32, 32), b(32, 32);
        for (std::size_t k = 0; k < a.data.size(); ++k) {
            a.data[k] = u(rng);
            b.data[k] = std::clamp(a.data[k] + n(rng), 0.f, 1.f);
        }
        const auto ra = raster(a), rb = raster(b);
        c.near("ssim pair " + std::to_string(i), ssim(a, b), testing::ssim_oracle(ra, rb), 1e-6);
        const auto ta = to_tensor(a).unsqueeze(0).to(torch::kDouble), tb = to_tensor(b).unsqueeze(0).to(torch::kDouble);
        c.near("ms_ssim pair " + std::to_string(i), ms_ssim(ta, tb, 2).item<double>(),
               testing::ms_ssim_oracle(ra, rb, 2), 1e-6);
    }
    c.near("psnr 0 dB", psnr(Image(8, 8, 0.f), Image(8, 8, 1.f)), 0.0, 1e-9);
    c.near("psnr 20 dB", psnr(Image(8, 8, 0.25f), Image(8, 8, 0.35f)), 20.0, 1e-5);
    Image same(8, 8, 0.4f);
    c.truth("psnr cap", psnr(same, same) == kPsnrCap);
    return {c.ok(), c.summary()};
}

// ---- 9 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome cli_determinism(const fs::path& root) {
    const auto data = root / "det";
    generate_dataset(2, 48, data, 9);
    auto run = [&](const std::string& name) {
        const std::string cmd = std::string("SCANET_DETERMINISTIC=1 \"") + SCANET_CLI_PATH + "\" train --data \"" +
                                data.string() + "\" --run-root \"" + (root / "runs").string() + "\" --name " + name +
                                " --scales 1.0 --patch 48 --stride 48 --epochs 4 --seed 5 --quiet >/dev/null 2>&1";
        const int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };
    const int a = run("det_a"), b = run("det_b");
    if (a != 0 || b != 0) return {false, "train exited with " + std::to_string(a) + "/" + std::to_string(b)};
    const auto ca = slurp(root / "runs" / "det_a" / "metrics.csv"), cb = slurp(root / "runs" / "det_b" / "metrics.csv");
    const auto rows = std::count(ca.begin(), ca.end(), '\n') - 1;
    const bool ok = rows > 0 && ca == cb;
    return {ok, std::to_string(rows) + " rows, " + (ca == cb ? "byte-identical" : "files differ")};
}

}  // namespace

int main() {
    ::setenv("SCANET_DETERMINISTIC", "1", 1);
    configure_runtime();
    testing::TempDir scratch("acceptance");

    int failures = 0;
    auto report = [&](int n, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.ok) ++failures;
        std::cout << (o.ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << name << ": " << o.detail << std::endl;
    };

    report(1, "formula suite", formula_suite);
    report(2, "gradient suite", gradient_suite);
    report(3, "zero-offset deformable conv", zero_offset_deform);
    report(4, "budget", budget_check);

    // Criteria 5 and 7 share the 40-epoch ablation runs.
    std::vector<AblationRun> runs;
    std::string ablation_error;
    const auto t_ab = std::chrono::steady_clock::now();
    try {
        const auto data = scratch.path / "ablation";
        generate_dataset(16, 64, data, 2024);
        for (std::uint64_t seed : {1, 2, 3})
            for (int row : {1, 4}) runs.push_back(run_ablation(data, row, seed));
    } catch (const std::exception& e) {
        ablation_error = e.what();
    }
    const double ab_secs = seconds_since(t_ab);

    report(5, "curriculum property", [&]() -> Outcome {
        if (!ablation_error.empty()) return {false, "error: " + ablation_error};
        const auto it = std::find_if(runs.begin(), runs.end(), [](const AblationRun& r) { return r.row == 4; });
        return curriculum_property(*it, 40);
    });
    report(6, "overfit smoke", [&] { return overfit_smoke(scratch.path); });
    report(7, "ablation direction", [&]() -> Outcome {
        if (!ablation_error.empty()) return {false, "error: " + ablation_error};
        auto o = ablation_direction(runs);
        o.detail += ", " + fmt("%.0f s", ab_secs);
        if (ab_secs >= 3600) o.ok = false;
        return o;
    });
    report(8, "metric oracle", metric_oracle);
    report(9, "CLI determinism", [&] { return cli_determinism(scratch.path); });

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
