#include "scanet/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

#include <ATen/CPUGeneratorImpl.h>

#include "scanet/attention_target.hpp"
#include "scanet/checkpoint.hpp"
#include "scanet/curriculum.hpp"
#include "scanet/errors.hpp"
#include "scanet/metrics.hpp"
#include "scanet/png_io.hpp"
#include "scanet/runtime.hpp"

namespace scanet {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kDataStream = 0x64617461;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;

std::uint64_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

void set_lr(torch::optim::Adam& opt, double lr) {
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

torch::optim::AdamOptions adam_options(const TrainConfig& cfg) {
    return torch::optim::AdamOptions(cfg.lr).betas({0.9, 0.999}).eps(1e-8);
}

std::pair<torch::Tensor, torch::Tensor> make_batch(const std::vector<PatchPair>& patches, std::size_t begin,
                                                   std::size_t end) {
    std::vector<Image> hazy, clear;
    for (std::size_t i = begin; i < end; ++i) {
        hazy.push_back(patches[i].hazy);
        clear.push_back(patches[i].clear);
    }
    return {stack_images(hazy), stack_images(clear)};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string metrics_row(const StepLog& s) {
    const auto& l = s.losses;
    return std::to_string(s.step) + "," + fmt(l.sl1) + "," + fmt(l.sl1_a) + "," + fmt(l.perceptual) + "," +
           fmt(l.msssim) + "," + fmt(l.adversarial) + "," + fmt(l.joint) + "," + fmt(s.lambda) + "," +
           fmt(s.psnr_train) + "," + std::to_string(s.epoch) + "," + fmt(s.lr);
}

EpochPlan plan_epoch(const std::vector<PairSample>& pairs, const TrainConfig& cfg, int64_t epoch) {
    std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, kDataStream), static_cast<std::uint64_t>(epoch)));
    EpochPlan plan;
    for (const auto& p : pairs) {
        const double scale = cfg.scales[pick(rng, cfg.scales.size())];
        std::vector<PatchPair> patches;
        try {
            patches = extract_patches(p.hazy, p.clear, scale, cfg.patch, cfg.stride);
        } catch (const InvalidArgument& e) {
            throw ConfigError("pair " + p.name + " at scale " + fmt(scale) + ": " + e.what());
        }
        for (auto& pp : patches) {
            const int rot = cfg.rotations[pick(rng, cfg.rotations.size())];
            const bool flip = cfg.hflip && (rng() & 1u);
            plan.patches.push_back(augment(pp, rot, flip));
        }
    }
    // Fisher-Yates with the same engine so the order is portable.
    for (std::size_t i = plan.patches.size(); i > 1; --i) std::swap(plan.patches[i - 1], plan.patches[pick(rng, i)]);
    return plan;
}

TrainResult train(const RunConfig& raw, const TrainOptions& options) {
    configure_runtime();
    RunConfig cfg = resolve(raw);
    const auto& tc = cfg.train;
    const auto& flags = tc.flags;

    const auto pairs = load_dataset(cfg.data, tc.max_pairs);
    if (pairs.empty()) throw ConfigError("dataset " + cfg.data.string() + " has no pairs");

    torch::manual_seed(tc.seed);
    TrainResult result;
    result.model = Generator(cfg.model);
    auto& model = *result.model;
    PatchDiscriminator disc{nullptr};
    if (flags.use_adversarial) disc = PatchDiscriminator(tc.discriminator);
    FeatureExtractor extractor{nullptr};
    if (flags.use_perceptual) extractor = FeatureExtractor(tc.perceptual);

    torch::optim::Adam gopt(model.parameters(), adam_options(tc));
    std::unique_ptr<torch::optim::Adam> dopt;
    if (disc) dopt = std::make_unique<torch::optim::Adam>(disc->parameters(), adam_options(tc));
    const TrainingObjects objs{&model, disc ? disc.get() : nullptr, &gopt, dopt.get()};

    CurriculumState curriculum(tc.curriculum);
    TrainingState state;
    if (options.resume_from) {
        const auto data = read_checkpoint(*options.resume_from);
        restore(data, objs);
        state = checkpoint_state(data);
        curriculum.restore_ema(state.curriculum_ema);
    }

    const auto run_dir = cfg.run_dir();
    std::ofstream csv;
    if (options.write_files) {
        fs::create_directories(run_dir / "checkpoints");
        fs::create_directories(run_dir / "samples");
        write_json(run_dir / "config.json", to_json(cfg));
        const auto csv_path = run_dir / "metrics.csv";
        if (options.resume_from && fs::exists(csv_path)) {
            // Drop rows past the checkpoint so a resumed log matches a fresh one.
            std::ifstream in(csv_path);
            std::string line, kept;
            std::getline(in, line);
            kept = line + "\n";
            while (std::getline(in, line)) {
                const auto comma = line.find(',');
                if (comma != std::string::npos && std::stoll(line.substr(0, comma)) <= state.step) kept += line + "\n";
            }
            in.close();
            csv.open(csv_path, std::ios::trunc);
            csv << kept;
        } else {
            csv.open(csv_path, std::ios::trunc);
            csv << kMetricsHeader << "\n";
        }
        if (!csv) throw IoError(csv_path, "cannot write metrics");
    }

    const int64_t ms_scales = std::min(tc.msssim_scales, max_ms_ssim_scales(tc.patch, tc.patch));
    if (flags.use_msssim && ms_scales < 1) throw ConfigError("patch too small for MS-SSIM");

    bool stop = tc.max_steps > 0 && state.step >= tc.max_steps;
    int64_t epoch = state.epoch;
    for (; epoch < tc.epochs && !stop; ++epoch) {
        const double lr = learning_rate(tc, epoch);
        set_lr(gopt, lr);
        if (dopt) set_lr(*dopt, lr);
        const double epoch_fraction = static_cast<double>(epoch + 1) / static_cast<double>(tc.epochs);
        auto noise_gen =
            at::make_generator<at::CPUGeneratorImpl>(mix_seed(mix_seed(tc.seed, kNoiseStream), epoch));
        const auto plan = plan_epoch(pairs, tc, epoch);
        model.train();

        double epoch_joint = 0.0;
        int64_t epoch_steps = 0;
        for (std::size_t b = 0; b < plan.patches.size(); b += static_cast<std::size_t>(tc.batch)) {
            const auto e = std::min(plan.patches.size(), b + static_cast<std::size_t>(tc.batch));
            auto [hazy, clear] = make_batch(plan.patches, b, e);

            LossComponents comp;
            double lambda = 1.0;
            torch::Tensor out;
            if (flags.use_agn) {
                const auto m_g = model.agn->forward(hazy).map;
                torch::Tensor m = m_g;
                if (flags.use_sl1a || flags.use_scl) {
                    const auto m_gt = attention_target(hazy, clear);
                    const auto la = smooth_l1(m_g, m_gt);
                    if (flags.use_sl1a) comp.sl1_a = la;
                    if (flags.use_scl) {
                        lambda = curriculum.update(la.item<double>(), epoch_fraction);
                        if (lambda < 1.0) m = blend_attention(m_g, m_gt, lambda);
                    }
                }
                out = model.reconstruct(hazy, m);
            } else {
                out = model.reconstruct(hazy, std::nullopt);
            }

            comp.sl1 = smooth_l1(out, clear);
            if (flags.use_perceptual) comp.perceptual = perceptual_loss(out, clear, *extractor);
            if (flags.use_msssim) comp.msssim = ms_ssim_loss(out, clear, ms_scales);
            torch::Tensor residual;
            if (flags.use_adversarial) {
                residual = clear - out;
                comp.adversarial = adversarial_loss(residual, *disc);
            }
            auto joint = joint_loss(comp, tc.weights);

            gopt.zero_grad();
            joint.joint.backward();
            gopt.step();

            if (disc) {
                const auto fake = residual.detach();
                const auto real = torch::randn(fake.sizes(), noise_gen, fake.options()) * tc.discriminator.real_noise;
                auto dl = discriminator_loss(*disc, real, fake);
                dopt->zero_grad();
                dl.backward();
                dopt->step();
            }

            StepLog log;
            log.step = ++state.step;
            log.epoch = epoch;
            log.epoch_fraction = epoch_fraction;
            log.lr = lr;
            log.lambda = lambda;
            log.losses = joint.report;
            if (!flags.use_sl1a && flags.use_scl) log.losses.sl1_a = curriculum.attention_loss();
            log.psnr_train = psnr(out, clear);
            if (csv.is_open()) csv << metrics_row(log) << "\n" << std::flush;
            if (options.on_step) options.on_step(log);
            result.log.push_back(log);
            epoch_joint += log.losses.joint;
            ++epoch_steps;

            if (options.write_files && tc.sample_every > 0 && state.step % tc.sample_every == 0) {
                char name[32];
                std::snprintf(name, sizeof name, "step_%06" PRId64 ".png", state.step);
                write_png(run_dir / "samples" / name, image_from_tensor(out[0].detach()));
            }
            if (tc.max_steps > 0 && state.step >= tc.max_steps) {
                stop = true;
                if (e < plan.patches.size()) break;
            }
        }
        if (!stop || epoch_steps * tc.batch >= static_cast<int64_t>(plan.patches.size())) state.epoch = epoch + 1;
        state.curriculum_ema = curriculum.ema();
        if (options.progress) {
            *options.progress << "epoch " << epoch + 1 << "/" << tc.epochs << " steps " << state.step << " joint "
                              << fmt(epoch_steps ? epoch_joint / static_cast<double>(epoch_steps) : 0.0) << " lr "
                              << fmt(lr) << "\n"
                              << std::flush;
        }
        if (options.write_files && tc.checkpoint_every > 0 && !stop && state.epoch % tc.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04" PRId64 ".ckpt", state.epoch);
            save_checkpoint(run_dir / "checkpoints" / name, objs, cfg, state);
        }
    }

    result.epochs_completed = state.epoch;
    result.steps = state.step;
    if (options.write_files) {
        const auto path = run_dir / "checkpoints" / "final.ckpt";
        save_checkpoint(path, objs, cfg, state);
        result.checkpoint = path;
    }
    model.eval();
    return result;
}

Image dehaze(GeneratorImpl& model, const Image& hazy) {
    torch::NoGradGuard ng;
    const bool was_training = model.is_training();
    model.eval();
    auto out = model.forward(to_tensor(hazy).unsqueeze(0)).dehazed;
    if (was_training) model.train();
    return image_from_tensor(out);
}

AttentionMap predict_attention(GeneratorImpl& model, const Image& hazy) {
    if (!model.has_agn()) throw InvalidArgument("model has no attention generator");
    torch::NoGradGuard ng;
    auto out = model.agn->forward(to_tensor(hazy).unsqueeze(0)).map;
    return {plane_from_tensor(out)};
}

PairEvaluation evaluate_pairs(GeneratorImpl& model, const std::vector<PairSample>& pairs) {
    PairEvaluation r;
    if (pairs.empty()) return r;
    for (const auto& p : pairs) {
        const auto d = dehaze(model, p.hazy);
        r.psnr_hazy += psnr(p.hazy, p.clear);
        r.psnr_dehazed += psnr(d, p.clear);
        r.ssim_hazy += ssim(p.hazy, p.clear);
        r.ssim_dehazed += ssim(d, p.clear);
    }
    const double n = static_cast<double>(pairs.size());
    r.psnr_hazy /= n;
    r.psnr_dehazed /= n;
    r.ssim_hazy /= n;
    r.ssim_dehazed /= n;
    return r;
}

}  // namespace scanet
