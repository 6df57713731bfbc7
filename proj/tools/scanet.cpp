#include <charconv>
// scanet: synthetic data, training, evaluation, inference, budget and
// ablation runs from the command line.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scanet/attention_target.hpp"
#include "scanet/checkpoint.hpp"
#include "scanet/config.hpp"
#include "scanet/errors.hpp"
#include "scanet/metrics.hpp"
#include "scanet/png_io.hpp"
#include "scanet/runtime.hpp"
#include "scanet/synthdata.hpp"
#include "scanet/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace scanet;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::pair<int64_t, int64_t> parse_size(const std::string& s) {
    auto number = [&](std::string_view part) {
        int64_t v = 0;
        const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || end != part.data() + part.size() || v < 1)
            throw UsageError("size must look like HxW, got '" + s + "'");
        return v;
    };
    const std::string_view sv(s);
    const auto x = sv.find_first_of("xX");
    if (x == std::string_view::npos) {
        const auto v = number(sv);
        return {v, v};
    }
    return {number(sv.substr(0, x)), number(sv.substr(x + 1))};
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- generate-data ----------------------------------------------------------

struct GenerateArgs {
    int64_t pairs = 4;
    int64_t size = 256;
    std::string out;
    std::uint64_t seed = 0;
    HazeParams params;
    std::string clear_source;
};

void setup_generate(CLI::App& app, GenerateArgs& a) {
    auto* cmd = app.add_subcommand("generate-data", "Write synthetic hazy/clear pairs and a manifest");
    cmd->add_option("--pairs", a.pairs, "Number of pairs")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--size", a.size, "Square image side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--out", a.out, "Output directory")->required();
    cmd->add_option("--seed", a.seed, "Dataset seed")->capture_default_str();
    cmd->add_option("--smoothness", a.params.smoothness, "Bump width relative to the image side")->capture_default_str();
    cmd->add_option("--t-min", a.params.t_min, "Minimum transmission")->capture_default_str();
    cmd->add_option("--airlight", a.params.transmission.airlight, "Atmospheric light")->capture_default_str();
    cmd->add_option("--bumps", a.params.transmission.bumps, "Gaussian bumps per field")->capture_default_str();
    cmd->add_flag("--per-pixel-airlight", a.params.transmission.per_pixel_airlight, "Spatially varying airlight");
    cmd->add_option("--clear-source", a.clear_source, "Directory of clear PNGs to haze instead of procedural scenes");
}

int run_generate(const GenerateArgs& a) {
    DatasetOptions opts;
    opts.params = a.params;
    if (!a.clear_source.empty()) opts.clear_source = a.clear_source;
    const auto m = generate_dataset(a.pairs, a.size, a.out, a.seed, opts);
    std::cout << "wrote " << m.entries.size() << " pairs of " << m.size << "x" << m.size << " to " << a.out
              << " (seed " << m.seed << ", t_min " << m.params.t_min << ", airlight "
              << m.params.transmission.airlight << ")\n";
    return 0;
}

// ---- train / ablate shared flags ---------------------------------------------

struct TrainArgs {
    std::string config;
    std::optional<std::string> data, name, run_root, perceptual_weights, resume;
    std::optional<int64_t> epochs, max_steps, batch, patch, stride, lr_decay_period, max_pairs, sample_every,
        checkpoint_every;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    std::vector<double> scales;
    std::optional<int> ablation;
    bool no_agn = false, no_sl1a = false, no_scl = false, no_perceptual = false, no_msssim = false,
         no_adversarial = false, no_pretrained = false, hflip = false, quiet = false;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--config", a.config, "JSON run config; flags override its values");
    cmd->add_option("--data", a.data, "Dataset root with clear/ and hazy/");
    cmd->add_option("--name", a.name, "Run name (directory under the run root)");
    cmd->add_option("--run-root", a.run_root, "Parent directory of runs");
    cmd->add_option("--epochs", a.epochs);
    cmd->add_option("--max-steps", a.max_steps, "Stop after this many optimizer steps");
    cmd->add_option("--batch", a.batch);
    cmd->add_option("--patch", a.patch);
    cmd->add_option("--stride", a.stride);
    cmd->add_option("--lr", a.lr);
    cmd->add_option("--lr-decay-period", a.lr_decay_period, "Epochs between halvings");
    cmd->add_option("--scales", a.scales, "Resize factors sampled per image per epoch");
    cmd->add_option("--seed", a.seed);
    cmd->add_option("--max-pairs", a.max_pairs, "Use only the first N pairs");
    cmd->add_option("--sample-every", a.sample_every, "Write a sample PNG every N steps");
    cmd->add_option("--checkpoint-every", a.checkpoint_every, "Write a checkpoint every N epochs");
    cmd->add_option("--ablation", a.ablation, "Use the flags of ablation row 1..7")->check(CLI::Range(1, 7));
    cmd->add_flag("--no-agn", a.no_agn);
    cmd->add_flag("--no-sl1a", a.no_sl1a);
    cmd->add_flag("--no-scl", a.no_scl);
    cmd->add_flag("--no-perceptual", a.no_perceptual);
    cmd->add_flag("--no-msssim", a.no_msssim);
    cmd->add_flag("--no-adversarial", a.no_adversarial);
    cmd->add_flag("--hflip", a.hflip, "Random horizontal flips in addition to rotations");
    cmd->add_option("--perceptual-weights", a.perceptual_weights, "Pickled dict of VGG16 conv weights");
    cmd->add_flag("--no-pretrained", a.no_pretrained, "Fixed random perceptual extractor");
    cmd->add_flag("--quiet", a.quiet, "No per-epoch progress lines");
}

RunConfig build_config(const TrainArgs& a) {
    RunConfig cfg;
    if (!a.config.empty()) cfg = run_config_from_json(read_json(a.config));
    auto& t = cfg.train;
    if (a.data) cfg.data = *a.data;
    if (a.name) cfg.name = *a.name;
    if (a.run_root) cfg.run_root = *a.run_root;
    if (a.epochs) t.epochs = *a.epochs;
    if (a.max_steps) t.max_steps = *a.max_steps;
    if (a.batch) t.batch = *a.batch;
    if (a.patch) t.patch = *a.patch;
    if (a.stride) t.stride = *a.stride;
    if (a.lr) t.lr = *a.lr;
    if (a.lr_decay_period) t.lr_decay_period = *a.lr_decay_period;
    if (!a.scales.empty()) t.scales = a.scales;
    if (a.seed) t.seed = *a.seed;
    if (a.max_pairs) t.max_pairs = *a.max_pairs;
    if (a.sample_every) t.sample_every = *a.sample_every;
    if (a.checkpoint_every) t.checkpoint_every = *a.checkpoint_every;
    if (a.ablation) t.flags = ablation_preset(*a.ablation);
    if (a.no_agn) t.flags.use_agn = t.flags.use_sl1a = t.flags.use_scl = false;
    if (a.no_sl1a) t.flags.use_sl1a = false;
    if (a.no_scl) t.flags.use_scl = false;
    if (a.no_perceptual) t.flags.use_perceptual = false;
    if (a.no_msssim) t.flags.use_msssim = false;
    if (a.no_adversarial) t.flags.use_adversarial = false;
    if (a.hflip) t.hflip = true;
    if (a.perceptual_weights) t.perceptual.weights = *a.perceptual_weights;
    if (a.no_pretrained) t.perceptual.weights.reset();
    if (cfg.data.empty()) throw UsageError("--data (or \"data\" in the config) is required");
    return resolve(cfg);
}

int run_train(const TrainArgs& a) {
    const auto cfg = build_config(a);
    TrainOptions opts;
    if (a.resume) opts.resume_from = fs::path(*a.resume);
    if (!a.quiet) opts.progress = &std::cout;
    const auto r = train(cfg, opts);
    std::cout << "finished " << r.steps << " steps, " << r.epochs_completed << " epochs; checkpoint "
              << (r.checkpoint ? r.checkpoint->string() : std::string("-")) << "\n";
    return 0;
}

// ---- ablate ------------------------------------------------------------------

struct AblateArgs {
    TrainArgs train;
    std::vector<int> rows{1, 2, 3, 4, 5, 6, 7};
    std::vector<std::uint64_t> seeds{0};
    std::string eval_data;
};

int run_ablate(const AblateArgs& a) {
    RunConfig base = build_config(a.train);
    const auto eval_pairs =
        load_dataset(a.eval_data.empty() ? base.data : fs::path(a.eval_data), a.eval_data.empty() ? base.train.max_pairs : 0);
    std::ostringstream md, csv;
    md << "| Number | Methods | L_sl1 | L_sl1^a | L_p | L_MS-SSIM | L_a | PSNR | SSIM |\n"
       << "|---|---|---|---|---|---|---|---|---|\n";
    csv << "row,method,sl1,sl1_a,perceptual,msssim,adversarial,psnr,ssim,seeds\n";
    auto mark = [](bool on) { return on ? "x" : ""; };
    for (int row : a.rows) {
        double p = 0, s = 0;
        for (auto seed : a.seeds) {
            RunConfig cfg = base;
            cfg.train.flags = ablation_preset(row);
            cfg.train.seed = seed;
            cfg.name = base.name + "_row" + std::to_string(row) + "_seed" + std::to_string(seed);
            cfg = resolve(cfg);
            TrainOptions opts;
            if (!a.train.quiet) std::cout << "== row (" << row << ") seed " << seed << "\n";
            if (!a.train.quiet) opts.progress = &std::cout;
            auto r = train(cfg, opts);
            const auto ev = evaluate_pairs(*r.model, eval_pairs);
            p += ev.psnr_dehazed;
            s += ev.ssim_dehazed;
        }
        p /= static_cast<double>(a.seeds.size());
        s /= static_cast<double>(a.seeds.size());
        const auto f = ablation_preset(row);
        md << "| (" << row << ") | " << ablation_label(row) << " | x | " << mark(f.use_sl1a) << " | "
           << mark(f.use_perceptual) << " | " << mark(f.use_msssim) << " | " << mark(f.use_adversarial) << " | "
           << fixed(p, 2) << " | " << fixed(s, 4) << " |\n";
        csv << row << "," << ablation_label(row) << ",1," << f.use_sl1a << "," << f.use_perceptual << ","
            << f.use_msssim << "," << f.use_adversarial << "," << fixed(p, 4) << "," << fixed(s, 6) << ","
            << a.seeds.size() << "\n";
    }
    const auto out_dir = base.run_root;
    fs::create_directories(out_dir);
    std::ofstream(out_dir / (base.name + "_ablation.md")) << md.str();
    std::ofstream(out_dir / (base.name + "_ablation.csv")) << csv.str();
    std::cout << md.str();
    return 0;
}

// ---- eval / infer / budget / attention-map -----------------------------------

struct EvalArgs {
    std::string pred, gt, out;
};

int run_eval(const EvalArgs& a) {
    const auto r = evaluate_directories(a.pred, a.gt);
    if (r.images.empty()) throw IoError(a.pred, "no PNG files to evaluate");
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        std::ofstream csv(fs::path(a.out) / "eval.csv");
        csv << "name,psnr,ssim\n";
        for (const auto& s : r.images) csv << s.name << "," << fixed(s.psnr, 6) << "," << fixed(s.ssim, 8) << "\n";
        write_json(fs::path(a.out) / "eval.json",
                   {{"images", r.images.size()}, {"mean_psnr", r.mean_psnr}, {"mean_ssim", r.mean_ssim}});
    }
    std::cout << "images " << r.images.size() << "  PSNR " << fixed(r.mean_psnr, 4) << " dB  SSIM "
              << fixed(r.mean_ssim, 6) << "\n";
    return 0;
}

struct InferArgs {
    std::string checkpoint, in, out, attention;
};

int run_infer(const InferArgs& a) {
    configure_runtime();
    auto model = load_generator(a.checkpoint);
    const auto hazy = read_png(a.in);
    const auto out = dehaze(*model, hazy);
    write_png(a.out, out);
    if (!a.attention.empty()) write_png(a.attention, predict_attention(*model, hazy).values);
    std::cout << "wrote " << a.out << " (" << out.width << "x" << out.height << ")\n";
    return 0;
}

struct BudgetArgs {
    std::string input = "1200x1600";
    std::string config;
    bool layers = false, as_json = false;
};

int run_budget(const BudgetArgs& a) {
    const auto [h, w] = parse_size(a.input);
    ModelConfig mc;
    if (!a.config.empty()) {
        const auto j = read_json(a.config);
        mc = j.contains("model") || j.contains("train") ? run_config_from_json(j).model : model_config_from_json(j);
    }
    Generator g(mc);
    const auto b = estimate_budget(*g, h, w);
    if (a.as_json) {
        json layers = json::array();
        for (const auto& l : b.layers)
            layers.push_back({{"name", l.name}, {"kind", l.kind}, {"params", l.params}, {"macs", l.macs},
                              {"counted", l.counted}});
        std::cout << json{{"input", {h, w}},
                          {"parameters", b.parameters},
                          {"macs", b.macs},
                          {"flops", b.flops},
                          {"uncounted", b.uncounted},
                          {"layers", layers}}
                         .dump(2)
                  << "\n";
        return 0;
    }
    std::cout << "input        " << h << "x" << w << "\n"
              << "parameters   " << b.parameters << " (" << fixed(b.parameters / 1e6, 3) << "M)\n"
              << "MACs         " << b.macs << " (" << fixed(b.macs / 1e9, 2) << "G)\n"
              << "FLOPs        " << b.flops << " (" << fixed(b.flops / 1e9, 2) << "G, 2 x MACs + sampling)\n";
    if (!b.uncounted.empty()) {
        std::cout << "not counted  ";
        for (std::size_t i = 0; i < b.uncounted.size(); ++i) std::cout << (i ? ", " : "") << b.uncounted[i];
        std::cout << "\n";
    }
    if (a.layers)
        for (const auto& l : b.layers)
            if (l.counted) std::cout << "  " << l.name << "  " << l.kind << "  params " << l.params << "  macs " << l.macs << "\n";
    return 0;
}

struct AttentionArgs {
    std::string hazy, clear, out, mode = "absolute";
};

int run_attention(const AttentionArgs& a) {
    const auto mode = a.mode == "brightening" ? DeviationMode::brightening : DeviationMode::absolute;
    const auto m = attention_target(read_png(a.hazy), read_png(a.clear), mode);
    write_png(a.out, m.values);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCANet non-homogeneous dehazing: data, training and evaluation"};
    app.require_subcommand(1);

    GenerateArgs gen;
    setup_generate(app, gen);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model; writes run/<name>/");
    add_train_flags(train_cmd, tr);
    train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");

    AblateArgs ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Train ablation rows and tabulate PSNR/SSIM");
    add_train_flags(ablate_cmd, ab.train);
    ablate_cmd->add_option("--rows", ab.rows, "Ablation rows to run")->check(CLI::Range(1, 7))->capture_default_str();
    ablate_cmd->add_option("--seeds", ab.seeds, "Seeds averaged per row")->capture_default_str();
    ablate_cmd->add_option("--eval-data", ab.eval_data, "Dataset scored after training (default: training data)");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of predicted PNGs against ground truth");
    eval_cmd->add_option("--pred", ev.pred, "Directory of predictions")->required();
    eval_cmd->add_option("--gt", ev.gt, "Directory of ground truth with matching names")->required();
    eval_cmd->add_option("--out", ev.out, "Directory for eval.csv and eval.json");

    InferArgs inf;
    auto* infer_cmd = app.add_subcommand("infer", "Dehaze one PNG");
    infer_cmd->add_option("--checkpoint", inf.checkpoint)->required();
    infer_cmd->add_option("--in", inf.in, "Hazy PNG")->required();
    infer_cmd->add_option("--out", inf.out, "Dehazed PNG")->required();
    infer_cmd->add_option("--attention", inf.attention, "Also write the predicted attention map");

    BudgetArgs bud;
    auto* budget_cmd = app.add_subcommand("budget", "Parameter and FLOPs estimate");
    budget_cmd->add_option("--input", bud.input, "Input size HxW")->capture_default_str();
    budget_cmd->add_option("--config", bud.config, "Model or run config JSON");
    budget_cmd->add_flag("--layers", bud.layers, "Per-layer listing");
    budget_cmd->add_flag("--json", bud.as_json, "JSON output");

    AttentionArgs att;
    auto* att_cmd = app.add_subcommand("attention-map", "Write the luminance-deviation attention target as PNG");
    att_cmd->add_option("--hazy", att.hazy)->required();
    att_cmd->add_option("--clear", att.clear)->required();
    att_cmd->add_option("--out", att.out)->required();
    att_cmd->add_option("--mode", att.mode)->check(CLI::IsMember({"absolute", "brightening"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("generate-data")) return run_generate(gen);
        if (app.got_subcommand("train")) return run_train(tr);
        if (app.got_subcommand("ablate")) return run_ablate(ab);
        if (app.got_subcommand("eval")) return run_eval(ev);
        if (app.got_subcommand("infer")) return run_infer(inf);
        if (app.got_subcommand("budget")) return run_budget(bud);
        if (app.got_subcommand("attention-map")) return run_attention(att);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
