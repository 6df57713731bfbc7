#pragma once

// Self-paced semi-curricular attention: during a warm-up window the attention
// map fed to the reconstruction network is a loss-driven mix of the
// predicted map and the luminance ground truth.

#include <optional>

#include <torch/types.h>

#include "scanet/image.hpp"

namespace scanet {

struct CurriculumConfig {
    double warmup_fraction = 0.25;
    double loss_hi = 0.1;   // lambda = 0 above this attention loss
    double loss_lo = 0.05;  // lambda = 1 at or below this attention loss
    // Drive lambda with an exponential moving average of the attention loss
    // instead of the current batch value.
    bool use_ema = false;
    double ema_decay = 0.9;
};

void validate(const CurriculumConfig& cfg);

// 0 for L > hi, 1 for L <= lo, linear (hi - L) / (hi - lo) in between.
// Outside the warm-up window (epoch_fraction > warmup_fraction) returns 1.
double lambda_schedule(double attention_loss, double epoch_fraction, const CurriculumConfig& cfg = {});

// M = lambda * M_g + (1 - lambda) * M_GT. M_GT is treated as a constant.
torch::Tensor blend_attention(const torch::Tensor& predicted, const torch::Tensor& target, double lambda);
AttentionMap blend_attention(const AttentionMap& predicted, const AttentionMap& target, double lambda);

// F_out = (1 - alpha) * F_in + alpha * (M (x) F_in); M is [B,1,H,W] or
// [B,C,H,W] and must match F_in spatially.
torch::Tensor apply_attention(const torch::Tensor& features, const torch::Tensor& map, const torch::Tensor& alpha);

// Per-iteration curriculum bookkeeping owned by the training loop.
class CurriculumState {
public:
    explicit CurriculumState(CurriculumConfig cfg = {});

    // Records the current attention loss and returns the lambda to use.
    double update(double attention_loss, double epoch_fraction);

    double epoch_fraction() const noexcept { return epoch_fraction_; }
    double attention_loss() const noexcept { return attention_loss_; }
    double lambda() const noexcept { return lambda_; }
    const CurriculumConfig& config() const noexcept { return cfg_; }
    // Moving average carried across checkpoints.
    std::optional<double> ema() const noexcept { return ema_; }
    void restore_ema(std::optional<double> v) noexcept { ema_ = v; }

private:
    CurriculumConfig cfg_;
    double epoch_fraction_ = 0.0;
    double attention_loss_ = 0.0;
    double lambda_ = 0.0;
    std::optional<double> ema_;
};

}  // namespace scanet
