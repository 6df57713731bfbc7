#pragma once

// Attention generator network: a stack of dual-attention units (channel
// attention followed by multi-scale pixel attention) and a 7x7 sigmoid head
// producing a single-channel attention map at input resolution.

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "scanet/layer_census.hpp"

namespace scanet {

struct DAUConfig {
    int64_t channels = 16;
    std::vector<int64_t> dilations{3, 5, 7};
    // Bottleneck of the channel-attention 1x1 pair: channels / reduction,
    // clamped to at least 1.
    int64_t reduction = 4;
    // One pixel-attention gate per channel instead of a single spatial gate.
    bool per_channel_pixel_gate = false;
};

struct AGNConfig {
    int64_t n_daus = 4;
    int64_t channels = 16;
    int64_t in_channels = 3;
    std::vector<int64_t> dilations{3, 5, 7};
    int64_t reduction = 4;
    bool per_channel_pixel_gate = false;

    DAUConfig unit() const { return {channels, dilations, reduction, per_channel_pixel_gate}; }
};

void validate(const DAUConfig& cfg);
void validate(const AGNConfig& cfg);

// y = conv3x3(relu(conv3x3(x))), w = sigmoid(1x1(relu(1x1(gap(y))))), out = y * w
class ChannelAttentionImpl : public torch::nn::Module {
public:
    ChannelAttentionImpl(int64_t channels, int64_t reduction);

    torch::Tensor forward(const torch::Tensor& x);
    // (output, gate[B,C,1,1])
    std::pair<torch::Tensor, torch::Tensor> forward_with_gate(const torch::Tensor& x);
    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;

    int64_t channels() const noexcept { return channels_; }

private:
    int64_t channels_, hidden_;
    torch::nn::Conv2d body1{nullptr}, body2{nullptr}, squeeze{nullptr}, excite{nullptr};
};
TORCH_MODULE(ChannelAttention);

// y = conv3x3(relu(conv3x3(x))); three parallel dilated 3x3 branches on y are
// concatenated, fused by a 1x1 conv, and a second 1x1 conv + sigmoid gives
// the pixel gate P[B,1,H,W] (or [B,C,H,W]); out = y * P.
class MultiScalePixelAttentionImpl : public torch::nn::Module {
public:
    explicit MultiScalePixelAttentionImpl(const DAUConfig& cfg);

    torch::Tensor forward(const torch::Tensor& x);
    std::pair<torch::Tensor, torch::Tensor> forward_with_gate(const torch::Tensor& x);
    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;

private:
    DAUConfig cfg_;
    torch::nn::Conv2d body1{nullptr}, body2{nullptr}, fuse{nullptr}, gate{nullptr};
    torch::nn::ModuleList branches{nullptr};
};
TORCH_MODULE(MultiScalePixelAttention);

// out = x + MSPA(CA(x))
class DualAttentionUnitImpl : public torch::nn::Module {
public:
    explicit DualAttentionUnitImpl(const DAUConfig& cfg);

    torch::Tensor forward(const torch::Tensor& x);
    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;

    ChannelAttention ca{nullptr};
    MultiScalePixelAttention mspa{nullptr};
};
TORCH_MODULE(DualAttentionUnit);

struct AttentionOutput {
    torch::Tensor map;       // M_g [B,1,H,W], values in (0,1)
    torch::Tensor features;  // last DAU output [B,C,H,W]
};

class AttentionGeneratorImpl : public torch::nn::Module {
public:
    static constexpr int64_t kMinSide = 16;

    explicit AttentionGeneratorImpl(const AGNConfig& cfg);

    AttentionOutput forward(const torch::Tensor& hazy);
    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;
    const AGNConfig& config() const noexcept { return cfg_; }

private:
    AGNConfig cfg_;
    torch::nn::Conv2d stem{nullptr}, head{nullptr};
    torch::nn::ModuleList units{nullptr};
};
TORCH_MODULE(AttentionGenerator);

}  // namespace scanet
