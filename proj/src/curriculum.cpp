#include "scanet/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "scanet/errors.hpp"

namespace scanet {

void validate(const CurriculumConfig& cfg) {
    if (!(cfg.warmup_fraction > 0.0 && cfg.warmup_fraction <= 1.0))
        throw InvalidArgument("curriculum warmup_fraction must lie in (0,1]");
    if (!(cfg.loss_lo < cfg.loss_hi)) throw InvalidArgument("curriculum thresholds need lo < hi");
    if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay < 1.0)) throw InvalidArgument("curriculum ema_decay must lie in [0,1)");
}

double lambda_schedule(double attention_loss, double epoch_fraction, const CurriculumConfig& cfg) {
    if (!(attention_loss >= 0.0)) throw InvalidArgument("lambda_schedule: attention loss must be non-negative");
    if (epoch_fraction > cfg.warmup_fraction) return 1.0;
    if (attention_loss > cfg.loss_hi) return 0.0;
    if (attention_loss <= cfg.loss_lo) return 1.0;
    return std::clamp((cfg.loss_hi - attention_loss) / (cfg.loss_hi - cfg.loss_lo), 0.0, 1.0);
}

torch::Tensor blend_attention(const torch::Tensor& predicted, const torch::Tensor& target, double lambda) {
    if (predicted.sizes() != target.sizes()) throw InvalidArgument("blend_attention: shape mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("blend_attention: lambda must lie in [0,1]");
    // Endpoints are returned untouched so that lambda in {0,1} is exact.
    if (lambda == 1.0) return predicted;
    if (lambda == 0.0) return target.detach();
    return lambda * predicted + (1.0 - lambda) * target.detach();
}

AttentionMap blend_attention(const AttentionMap& predicted, const AttentionMap& target, double lambda) {
    if (!predicted.values.same_shape(target.values)) throw InvalidArgument("blend_attention: shape mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("blend_attention: lambda must lie in [0,1]");
    AttentionMap out{Plane(predicted.values.height, predicted.values.width)};
    const float l = static_cast<float>(lambda);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const float g = predicted.values.data[i], t = target.values.data[i];
        out.values.data[i] = lambda == 1.0 ? g : lambda == 0.0 ? t : l * g + (1.0f - l) * t;
    }
    return out;
}

torch::Tensor apply_attention(const torch::Tensor& features, const torch::Tensor& map, const torch::Tensor& alpha) {
    if (features.dim() != 4 || map.dim() != 4) throw InvalidArgument("apply_attention: expected 4-D tensors");
    if (map.size(0) != features.size(0) || map.size(2) != features.size(2) || map.size(3) != features.size(3) ||
        (map.size(1) != 1 && map.size(1) != features.size(1))) {
        throw InvalidArgument("apply_attention: attention map does not broadcast over the features");
    }
    if (alpha.numel() != 1) throw InvalidArgument("apply_attention: alpha must be a scalar");
    return (1 - alpha) * features + alpha * (map * features);
}

CurriculumState::CurriculumState(CurriculumConfig cfg) : cfg_(cfg) { validate(cfg_); }

double CurriculumState::update(double attention_loss, double epoch_fraction) {
    if (!(attention_loss >= 0.0)) throw InvalidArgument("curriculum: attention loss must be non-negative");
    epoch_fraction_ = epoch_fraction;
    attention_loss_ = attention_loss;
    double driver = attention_loss;
    if (cfg_.use_ema) {
        ema_ = ema_ ? cfg_.ema_decay * *ema_ + (1.0 - cfg_.ema_decay) * attention_loss : attention_loss;
        driver = *ema_;
    }
    lambda_ = lambda_schedule(driver, epoch_fraction, cfg_);
    return lambda_;
}

}  // namespace scanet
