#pragma once

// Scene reconstruction network: stride-2 encoder to H/4, residual stack and
// deformable layers at H/4, transposed-conv decoder and a reflection-padded
// 7x7 tanh tail. Attention enters through learnable gates at the
// full-resolution stem features and at the H/4 bottleneck.

#include <optional>
#include <string>

#include <torch/torch.h>

#include "scanet/deform_conv.hpp"
#include "scanet/layer_census.hpp"

namespace scanet {

struct SRNConfig {
    int64_t in_channels = 3;
    int64_t stem_channels = 32;   // full resolution
    int64_t mid_channels = 64;    // H/2
    int64_t base_channels = 128;  // H/4
    int64_t n_res_blocks = 6;
    int64_t n_deform_layers = 2;
    int64_t downsample_factor = 4;
    bool inject_input = true;
    bool inject_bottleneck = true;
};

void validate(const SRNConfig& cfg);

// Learnable attention mixing weights, one per enabled injection point, each
// initialised to 0.5.
class AttentionGatesImpl : public torch::nn::Module {
public:
    AttentionGatesImpl(bool input, bool bottleneck);

    torch::Tensor input, bottleneck;  // undefined when the point is disabled
};
TORCH_MODULE(AttentionGates);

class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualBlock);

struct Encoded {
    torch::Tensor features;  // [B, base_channels, Hp/4, Wp/4]
    int64_t height = 0, width = 0;  // unpadded input size
};

class SceneReconstructionImpl : public torch::nn::Module {
public:
    explicit SceneReconstructionImpl(const SRNConfig& cfg);

    // Reflect-pads to a multiple of 4, applies the stem and both stride-2
    // convolutions. When `map` is given the configured injection points use
    // it with the matching gate from `gates`.
    Encoded encode(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map = std::nullopt,
                   AttentionGatesImpl* gates = nullptr);
    // Residual blocks followed by the deformable layers.
    torch::Tensor transform(const torch::Tensor& features);
    // Transposed convolutions and tail; output is cropped to height x width
    // when given, else it is 4x the feature size. Values in [0,1].
    torch::Tensor decode(const torch::Tensor& features, std::optional<int64_t> height = std::nullopt,
                         std::optional<int64_t> width = std::nullopt);
    // Reflection pad, 7x7 conv, tanh, mapped to [0,1].
    torch::Tensor tail_block(const torch::Tensor& features);

    torch::Tensor forward(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map = std::nullopt,
                          AttentionGatesImpl* gates = nullptr);

    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;
    const SRNConfig& config() const noexcept { return cfg_; }

    torch::nn::Conv2d stem{nullptr}, down1{nullptr}, down2{nullptr}, tail{nullptr};
    torch::nn::ModuleList res_blocks{nullptr}, deform_layers{nullptr};
    torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr};

private:
    SRNConfig cfg_;
};
TORCH_MODULE(SceneReconstruction);

}  // namespace scanet
