#pragma once

// Training loop: per batch AGN forward, attention loss, curriculum lambda,
// blended map, SRN forward, active losses, generator step and (with the
// adversarial term) a discriminator step. Writes run/<name>/{config.json,
// metrics.csv, checkpoints/, samples/}.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "scanet/config.hpp"
#include "scanet/data.hpp"
#include "scanet/losses.hpp"
#include "scanet/model.hpp"

namespace scanet {

struct StepLog {
    int64_t step = 0;  // 1-based
    int64_t epoch = 0;  // 0-based
    double epoch_fraction = 0;
    double lr = 0;
    double lambda = 1;
    double psnr_train = 0;
    LossReport losses;
};

struct TrainOptions {
    // Continue from this checkpoint (written by an earlier run of the same
    // config).
    std::optional<std::filesystem::path> resume_from;
    bool write_files = true;
    std::function<void(const StepLog&)> on_step;
    std::ostream* progress = nullptr;  // one line per epoch
};

struct TrainResult {
    Generator model{nullptr};
    std::vector<StepLog> log;  // steps run in this invocation
    int64_t epochs_completed = 0;
    int64_t steps = 0;
    std::optional<std::filesystem::path> checkpoint;
};

inline constexpr const char* kMetricsHeader =
    "step,sl1,sl1_a,perceptual,msssim,adversarial,joint,lambda,psnr_train,epoch,lr";

std::string metrics_row(const StepLog& s);

// One epoch of training patches in seed-determined order.
struct EpochPlan {
    std::vector<PatchPair> patches;
};
EpochPlan plan_epoch(const std::vector<PairSample>& pairs, const TrainConfig& cfg, int64_t epoch);

TrainResult train(const RunConfig& cfg, const TrainOptions& options = {});

// Whole-image inference with the predicted attention map.
Image dehaze(GeneratorImpl& model, const Image& hazy);
AttentionMap predict_attention(GeneratorImpl& model, const Image& hazy);

struct PairEvaluation {
    double psnr_hazy = 0, psnr_dehazed = 0;
    double ssim_hazy = 0, ssim_dehazed = 0;
};

// Means over the pairs of hazy-vs-clear and dehazed-vs-clear scores.
PairEvaluation evaluate_pairs(GeneratorImpl& model, const std::vector<PairSample>& pairs);

}  // namespace scanet
