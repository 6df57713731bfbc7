#include "scanet/agn.hpp"

#include <algorithm>

#include "scanet/errors.hpp"

namespace scanet {
namespace F = torch::nn::functional;
namespace {

torch::nn::Conv2d conv(int64_t cin, int64_t cout, int64_t k, int64_t dilation = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, cout, k).padding(dilation * (k / 2)).dilation(dilation));
}

void check_channels(const torch::Tensor& x, int64_t channels, const char* who) {
    if (x.dim() != 4 || x.size(1) != channels) {
        throw InvalidArgument(std::string(who) + ": expected [B," + std::to_string(channels) + ",H,W] input");
    }
}

}  // namespace

void validate(const DAUConfig& cfg) {
    if (cfg.channels < 1) throw InvalidArgument("DAU channels must be >= 1");
    if (cfg.reduction < 1) throw InvalidArgument("DAU reduction must be >= 1");
    if (cfg.dilations.empty()) throw InvalidArgument("DAU needs at least one dilation ratio");
    for (auto d : cfg.dilations) {
        if (d < 1) throw InvalidArgument("DAU dilation ratios must be positive");
    }
}

void validate(const AGNConfig& cfg) {
    if (cfg.n_daus < 1) throw InvalidArgument("AGN needs at least one DAU");
    if (cfg.in_channels < 1) throw InvalidArgument("AGN input channels must be >= 1");
    validate(cfg.unit());
}

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t reduction)
    : channels_(channels), hidden_(std::max<int64_t>(1, channels / std::max<int64_t>(1, reduction))) {
    body1 = register_module("body1", conv(channels, channels, 3));
    body2 = register_module("body2", conv(channels, channels, 3));
    squeeze = register_module("squeeze", conv(channels, hidden_, 1));
    excite = register_module("excite", conv(hidden_, channels, 1));
}

std::pair<torch::Tensor, torch::Tensor> ChannelAttentionImpl::forward_with_gate(const torch::Tensor& x) {
    check_channels(x, channels_, "channel_attention");
    auto y = body2(torch::relu(body1(x)));
    auto w = torch::sigmoid(excite(torch::relu(squeeze(y.mean({2, 3}, /*keepdim=*/true)))));
    return {y * w, w};
}

torch::Tensor ChannelAttentionImpl::forward(const torch::Tensor& x) { return forward_with_gate(x).first; }

void ChannelAttentionImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const {
    census.conv(prefix + ".body1", channels_, channels_, 3, h, w);
    census.uncounted(prefix + ".relu", "activation");
    census.conv(prefix + ".body2", channels_, channels_, 3, h, w);
    census.uncounted(prefix + ".pool", "global_average_pool");
    census.conv(prefix + ".squeeze", channels_, hidden_, 1, 1, 1);
    census.conv(prefix + ".excite", hidden_, channels_, 1, 1, 1);
    census.uncounted(prefix + ".sigmoid", "activation");
    census.elementwise(prefix + ".gate", channels_ * h * w);
}

MultiScalePixelAttentionImpl::MultiScalePixelAttentionImpl(const DAUConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    const int64_t c = cfg_.channels;
    body1 = register_module("body1", conv(c, c, 3));
    body2 = register_module("body2", conv(c, c, 3));
    branches = register_module("branches", torch::nn::ModuleList());
    for (auto d : cfg_.dilations) branches->push_back(conv(c, c, 3, d));
    fuse = register_module("fuse", conv(c * static_cast<int64_t>(cfg_.dilations.size()), c, 1));
    gate = register_module("gate", conv(c, cfg_.per_channel_pixel_gate ? c : 1, 1));
}

std::pair<torch::Tensor, torch::Tensor> MultiScalePixelAttentionImpl::forward_with_gate(const torch::Tensor& x) {
    check_channels(x, cfg_.channels, "multi_scale_pixel_attention");
    auto y = body2(torch::relu(body1(x)));
    std::vector<torch::Tensor> scales;
    scales.reserve(branches->size());
    for (const auto& b : *branches) scales.push_back(torch::relu(b->as<torch::nn::Conv2dImpl>()->forward(y)));
    auto p = torch::sigmoid(gate(torch::relu(fuse(torch::cat(scales, 1)))));
    return {y * p, p};
}

torch::Tensor MultiScalePixelAttentionImpl::forward(const torch::Tensor& x) { return forward_with_gate(x).first; }

void MultiScalePixelAttentionImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h,
                                            int64_t w) const {
    const int64_t c = cfg_.channels;
    census.conv(prefix + ".body1", c, c, 3, h, w);
    census.uncounted(prefix + ".relu", "activation");
    census.conv(prefix + ".body2", c, c, 3, h, w);
    for (std::size_t i = 0; i < cfg_.dilations.size(); ++i) {
        census.conv(prefix + ".branches." + std::to_string(i), c, c, 3, h, w);
    }
    census.uncounted(prefix + ".concat", "concat");
    census.conv(prefix + ".fuse", c * static_cast<int64_t>(cfg_.dilations.size()), c, 1, h, w);
    const int64_t g = cfg_.per_channel_pixel_gate ? c : 1;
    census.conv(prefix + ".gate", c, g, 1, h, w);
    census.uncounted(prefix + ".sigmoid", "activation");
    census.elementwise(prefix + ".apply", c * h * w);
}

DualAttentionUnitImpl::DualAttentionUnitImpl(const DAUConfig& cfg) {
    validate(cfg);
    ca = register_module("ca", ChannelAttention(cfg.channels, cfg.reduction));
    mspa = register_module("mspa", MultiScalePixelAttention(cfg));
}

torch::Tensor DualAttentionUnitImpl::forward(const torch::Tensor& x) { return x + mspa(ca(x)); }

void DualAttentionUnitImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const {
    ca->describe(census, prefix + ".ca", h, w);
    mspa->describe(census, prefix + ".mspa", h, w);
    census.uncounted(prefix + ".residual", "add");
}

AttentionGeneratorImpl::AttentionGeneratorImpl(const AGNConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    stem = register_module("stem", conv(cfg_.in_channels, cfg_.channels, 3));
    units = register_module("units", torch::nn::ModuleList());
    for (int64_t i = 0; i < cfg_.n_daus; ++i) units->push_back(DualAttentionUnit(cfg_.unit()));
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.channels, 1, 7)));
}

AttentionOutput AttentionGeneratorImpl::forward(const torch::Tensor& hazy) {
    if (hazy.dim() != 4 || hazy.size(1) != cfg_.in_channels)
        throw InvalidArgument("agn: expected [B," + std::to_string(cfg_.in_channels) + ",H,W] input");
    if (hazy.size(2) < kMinSide || hazy.size(3) < kMinSide)
        throw InvalidArgument("agn: input must be at least 16x16");
    auto f = stem(hazy);
    for (const auto& u : *units) f = u->as<DualAttentionUnitImpl>()->forward(f);
    auto m = torch::sigmoid(head(F::pad(f, F::PadFuncOptions({3, 3, 3, 3}).mode(torch::kReflect))));
    return {m, f};
}

void AttentionGeneratorImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const {
    census.conv(prefix + ".stem", cfg_.in_channels, cfg_.channels, 3, h, w);
    for (int64_t i = 0; i < cfg_.n_daus; ++i) {
        units->ptr(static_cast<std::size_t>(i))->as<DualAttentionUnitImpl>()->describe(census, prefix + ".units." + std::to_string(i), h, w);
    }
    census.uncounted(prefix + ".head_pad", "reflection_pad");
    census.conv(prefix + ".head", cfg_.channels, 1, 7, h, w);
    census.uncounted(prefix + ".head_sigmoid", "activation");
}

}  // namespace scanet
