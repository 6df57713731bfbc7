#include "scanet/srn.hpp"

#include "scanet/curriculum.hpp"
#include "scanet/errors.hpp"

namespace scanet {
namespace F = torch::nn::functional;
namespace {

torch::nn::Conv2d conv3(int64_t cin, int64_t cout, int64_t stride = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, cout, 3).stride(stride).padding(1));
}

// He-normal weights and zero biases for the ReLU layers. Transposed convs
// keep their fan on dim 0, so fan_out gives the per-output fan-in.
void he_init(torch::nn::Module& m) {
    torch::NoGradGuard ng;
    for (auto& p : m.named_parameters()) {
        const auto& k = p.key();
        if (k.rfind("tail.", 0) == 0 || k.find("offset_conv") != std::string::npos) continue;
        if (p.value().dim() == 4) {
            const torch::nn::init::FanModeType mode =
                k.rfind("up", 0) == 0 ? torch::nn::init::FanModeType(torch::kFanOut) : torch::kFanIn;
            torch::nn::init::kaiming_normal_(p.value(), 0, mode, torch::kReLU);
        } else {
            p.value().zero_();
        }
    }
}

torch::nn::ConvTranspose2d up(int64_t cin, int64_t cout) {
    return torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(cin, cout, 3).stride(2).padding(1).output_padding(1));
}

torch::Tensor reflect_pad_to(const torch::Tensor& x, int64_t multiple) {
    const int64_t ph = (multiple - x.size(2) % multiple) % multiple;
    const int64_t pw = (multiple - x.size(3) % multiple) % multiple;
    if (ph == 0 && pw == 0) return x;
    return F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReflect));
}

}  // namespace

void validate(const SRNConfig& cfg) {
    if (cfg.in_channels < 1 || cfg.stem_channels < 1 || cfg.mid_channels < 1 || cfg.base_channels < 1)
        throw InvalidArgument("SRN channel counts must be >= 1");
    if (cfg.n_res_blocks < 1) throw InvalidArgument("SRN needs at least one residual block");
    if (cfg.n_deform_layers < 0) throw InvalidArgument("SRN deformable layer count must be >= 0");
    if (cfg.downsample_factor != 4) throw InvalidArgument("SRN downsample factor is fixed at 4");
}

AttentionGatesImpl::AttentionGatesImpl(bool use_input, bool use_bottleneck) {
    if (use_input) input = register_parameter("input", torch::full({1}, 0.5));
    if (use_bottleneck) bottleneck = register_parameter("bottleneck", torch::full({1}, 0.5));
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
    conv1 = register_module("conv1", conv3(channels, channels));
    conv2 = register_module("conv2", conv3(channels, channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + conv2(torch::relu(conv1(x))); }

SceneReconstructionImpl::SceneReconstructionImpl(const SRNConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    stem = register_module("stem", conv3(cfg_.in_channels, cfg_.stem_channels));
    down1 = register_module("down1", conv3(cfg_.stem_channels, cfg_.mid_channels, 2));
    down2 = register_module("down2", conv3(cfg_.mid_channels, cfg_.base_channels, 2));
    res_blocks = register_module("res_blocks", torch::nn::ModuleList());
    for (int64_t i = 0; i < cfg_.n_res_blocks; ++i) res_blocks->push_back(ResidualBlock(cfg_.base_channels));
    deform_layers = register_module("deform_layers", torch::nn::ModuleList());
    for (int64_t i = 0; i < cfg_.n_deform_layers; ++i)
        deform_layers->push_back(DeformConv2d(cfg_.base_channels, cfg_.base_channels));
    up1 = register_module("up1", up(cfg_.base_channels, cfg_.mid_channels));
    up2 = register_module("up2", up(cfg_.mid_channels, cfg_.stem_channels));
    tail = register_module("tail", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.stem_channels, 3, 7)));
    he_init(*this);
}

Encoded SceneReconstructionImpl::encode(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map,
                                        AttentionGatesImpl* gates) {
    if (hazy.dim() != 4 || hazy.size(1) != cfg_.in_channels)
        throw InvalidArgument("srn: expected [B," + std::to_string(cfg_.in_channels) + ",H,W] input");
    if (hazy.size(2) < 4 || hazy.size(3) < 4) throw InvalidArgument("srn: input must be at least 4x4");
    torch::Tensor m;
    if (map) {
        if (map->dim() != 4 || map->size(0) != hazy.size(0) || map->size(1) != 1 || map->size(2) != hazy.size(2) ||
            map->size(3) != hazy.size(3))
            throw InvalidArgument("srn: attention map must be [B,1,H,W] matching the input");
        if (gates == nullptr) throw InvalidArgument("srn: attention map given without gates");
        m = reflect_pad_to(*map, 4);
    }
    Encoded enc{torch::Tensor(), hazy.size(2), hazy.size(3)};
    auto f = torch::relu(stem(reflect_pad_to(hazy, 4)));
    if (m.defined() && cfg_.inject_input) f = apply_attention(f, m, gates->input);
    f = torch::relu(down1(f));
    f = torch::relu(down2(f));
    if (m.defined() && cfg_.inject_bottleneck) f = apply_attention(f, F::avg_pool2d(m, F::AvgPool2dFuncOptions(4)), gates->bottleneck);
    enc.features = f;
    return enc;
}

torch::Tensor SceneReconstructionImpl::transform(const torch::Tensor& features) {
    auto f = features;
    for (const auto& b : *res_blocks) f = b->as<ResidualBlockImpl>()->forward(f);
    for (const auto& d : *deform_layers) f = torch::relu(d->as<DeformConv2dImpl>()->forward(f));
    return f;
}

torch::Tensor SceneReconstructionImpl::tail_block(const torch::Tensor& features) {
    auto y = tail(F::pad(features, F::PadFuncOptions({3, 3, 3, 3}).mode(torch::kReflect)));
    return (torch::tanh(y) + 1.0) * 0.5;
}

torch::Tensor SceneReconstructionImpl::decode(const torch::Tensor& features, std::optional<int64_t> height,
                                              std::optional<int64_t> width) {
    auto f = torch::relu(up1(features));
    f = torch::relu(up2(f));
    auto out = tail_block(f);
    if (height) out = out.slice(2, 0, *height);
    if (width) out = out.slice(3, 0, *width);
    return out;
}

torch::Tensor SceneReconstructionImpl::forward(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map,
                                               AttentionGatesImpl* gates) {
    auto enc = encode(hazy, map, gates);
    return decode(transform(enc.features), enc.height, enc.width);
}

void SceneReconstructionImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const {
    const int64_t hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4;
    const int64_t h2 = hp / 2, w2 = wp / 2, h4 = hp / 4, w4 = wp / 4;
    census.uncounted(prefix + ".pad", "reflection_pad");
    census.conv(prefix + ".stem", cfg_.in_channels, cfg_.stem_channels, 3, hp, wp);
    if (cfg_.inject_input) census.elementwise(prefix + ".inject_input", 2 * cfg_.stem_channels * hp * wp);
    census.conv(prefix + ".down1", cfg_.stem_channels, cfg_.mid_channels, 3, h2, w2);
    census.conv(prefix + ".down2", cfg_.mid_channels, cfg_.base_channels, 3, h4, w4);
    if (cfg_.inject_bottleneck) {
        census.uncounted(prefix + ".attention_pool", "area_downsample");
        census.elementwise(prefix + ".inject_bottleneck", 2 * cfg_.base_channels * h4 * w4);
    }
    for (int64_t i = 0; i < cfg_.n_res_blocks; ++i) {
        const auto p = prefix + ".res_blocks." + std::to_string(i);
        census.conv(p + ".conv1", cfg_.base_channels, cfg_.base_channels, 3, h4, w4);
        census.conv(p + ".conv2", cfg_.base_channels, cfg_.base_channels, 3, h4, w4);
    }
    for (int64_t i = 0; i < cfg_.n_deform_layers; ++i) {
        deform_layers->ptr(static_cast<std::size_t>(i))
            ->as<DeformConv2dImpl>()
            ->describe(census, prefix + ".deform_layers." + std::to_string(i), h4, w4);
    }
    census.transposed_conv(prefix + ".up1", cfg_.base_channels, cfg_.mid_channels, 3, h4, w4);
    census.transposed_conv(prefix + ".up2", cfg_.mid_channels, cfg_.stem_channels, 3, h2, w2);
    census.uncounted(prefix + ".tail_pad", "reflection_pad");
    census.conv(prefix + ".tail", cfg_.stem_channels, 3, 7, hp, wp);
    census.uncounted(prefix + ".tail_tanh", "activation");
}

}  // namespace scanet
