#include "scanet/losses.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <ATen/CPUGeneratorImpl.h>

#include "scanet/errors.hpp"

namespace scanet {
namespace F = torch::nn::functional;
namespace {

void check_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (!a.defined() || !b.defined() || a.sizes() != b.sizes())
        throw InvalidArgument(std::string(what) + ": shape mismatch");
}

torch::nn::Conv2d vgg_conv(int64_t cin, int64_t cout) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, cout, 3).padding(1));
}

// Depthwise separable "valid" Gaussian filter over the last two dims.
torch::Tensor gauss(const torch::Tensor& x, const torch::Tensor& taps) {
    const int64_t c = x.size(1), n = taps.size(0);
    auto y = F::conv2d(x, taps.view({1, 1, 1, n}).expand({c, 1, 1, n}), F::Conv2dFuncOptions().groups(c));
    return F::conv2d(y, taps.view({1, 1, n, 1}).expand({c, 1, n, 1}), F::Conv2dFuncOptions().groups(c));
}

}  // namespace

void validate(const LossWeights& w) {
    for (double v : {w.sl1, w.sl1_a, w.perceptual, w.msssim, w.adversarial})
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("loss weights must be finite and >= 0");
}

torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target) {
    check_same(pred, target, "smooth_l1");
    const auto q = (pred - target).abs();
    return torch::where(q < 1.0, 0.5 * q * q, q - 0.5).mean();
}

FeatureExtractorImpl::FeatureExtractorImpl(const FeatureExtractorConfig& cfg) {
    conv1_1 = register_module("conv1_1", vgg_conv(3, cfg.width1));
    conv1_2 = register_module("conv1_2", vgg_conv(cfg.width1, cfg.width1));
    conv2_1 = register_module("conv2_1", vgg_conv(cfg.width1, cfg.width2));
    conv2_2 = register_module("conv2_2", vgg_conv(cfg.width2, cfg.width2));
    conv3_1 = register_module("conv3_1", vgg_conv(cfg.width2, cfg.width3));
    conv3_2 = register_module("conv3_2", vgg_conv(cfg.width3, cfg.width3));
    conv3_3 = register_module("conv3_3", vgg_conv(cfg.width3, cfg.width3));

    torch::NoGradGuard ng;
    if (cfg.weights) {
        std::ifstream in(*cfg.weights, std::ios::binary);
        if (!in) throw ConfigError("perceptual weights not readable: " + cfg.weights->string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        c10::IValue value;
        try {
            value = torch::pickle_load(bytes);
        } catch (const c10::Error& e) {
            throw ConfigError("perceptual weights " + cfg.weights->string() + ": " + e.what_without_backtrace());
        }
        if (!value.isGenericDict()) throw ConfigError("perceptual weights must be a dict of tensors");
        auto dict = value.toGenericDict();
        for (auto& p : named_parameters()) {
            const auto key = p.key();
            if (!dict.contains(key)) throw ConfigError("perceptual weights: missing entry " + key);
            const auto t = dict.at(key).toTensor();
            if (t.sizes() != p.value().sizes()) throw ConfigError("perceptual weights: shape mismatch for " + key);
            p.value().copy_(t);
        }
        pretrained_ = true;
    } else {
        auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg.seed);
        for (auto& p : named_parameters()) {
            if (p.key().ends_with(".bias")) {
                p.value().zero_();
            } else {
                const double fan_in = static_cast<double>(p.value().size(1) * 9);
                p.value().normal_(0.0, std::sqrt(2.0 / fan_in), gen);
            }
        }
    }
    for (auto& p : parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> FeatureExtractorImpl::forward(const torch::Tensor& images) {
    auto opts = images.options();
    const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
    const auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
    auto x = (images - mean) / std;
    std::vector<torch::Tensor> out;
    x = torch::relu(conv1_2(torch::relu(conv1_1(x))));
    out.push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    x = torch::relu(conv2_2(torch::relu(conv2_1(x))));
    out.push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    x = torch::relu(conv3_3(torch::relu(conv3_2(torch::relu(conv3_1(x))))));
    out.push_back(x);
    return out;
}

torch::Tensor perceptual_from_features(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size() || a.empty()) throw InvalidArgument("perceptual: feature lists differ");
    torch::Tensor total;
    for (std::size_t k = 0; k < a.size(); ++k) {
        check_same(a[k], b[k], "perceptual");
        auto d = (a[k] - b[k]).pow(2).mean();
        total = total.defined() ? total + d : d;
    }
    return total / static_cast<double>(a.size());
}

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, FeatureExtractorImpl& extractor) {
    check_same(pred, target, "perceptual");
    return perceptual_from_features(extractor.forward(pred), extractor.forward(target));
}

std::vector<double> gaussian_taps(int64_t size, double sigma) {
    if (size < 1 || !(sigma > 0)) throw InvalidArgument("gaussian_taps: size >= 1 and sigma > 0 required");
    std::vector<double> taps(static_cast<std::size_t>(size));
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    double sum = 0.0;
    for (int64_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - c;
        taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

int64_t max_ms_ssim_scales(int64_t height, int64_t width, int64_t window) {
    const int64_t side = std::min(height, width);
    int64_t s = 0;
    while (s < 5 && side >= (int64_t{1} << s) * window) ++s;
    return s;
}

torch::Tensor ms_ssim(const torch::Tensor& pred, const torch::Tensor& target, int64_t scales, const SsimOptions& opts) {
    check_same(pred, target, "ms_ssim");
    if (pred.dim() != 4) throw InvalidArgument("ms_ssim: expected [B,C,H,W]");
    if (scales < 1 || scales > 5) throw InvalidArgument("ms_ssim: scales must be in [1,5]");
    if (max_ms_ssim_scales(pred.size(2), pred.size(3), opts.window) < scales)
        throw InvalidArgument("ms_ssim: " + std::to_string(pred.size(2)) + "x" + std::to_string(pred.size(3)) +
                              " is too small for " + std::to_string(scales) + " scales");

    const auto tap_vec = gaussian_taps(opts.window, opts.sigma);
    const auto taps = torch::tensor(tap_vec, pred.options().requires_grad(false));
    const double c1 = std::pow(opts.k1 * opts.data_range, 2), c2 = std::pow(opts.k2 * opts.data_range, 2);
    double wsum = 0.0;
    for (int64_t s = 0; s < scales; ++s) wsum += kMsSsimWeights[s];

    auto x = pred, y = target;
    torch::Tensor result;
    for (int64_t s = 0; s < scales; ++s) {
        if (s > 0) {
            x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
            y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
        }
        const auto mu1 = gauss(x, taps), mu2 = gauss(y, taps);
        const auto s11 = gauss(x * x, taps) - mu1 * mu1;
        const auto s22 = gauss(y * y, taps) - mu2 * mu2;
        const auto s12 = gauss(x * y, taps) - mu1 * mu2;
        const auto cs_map = (2.0 * s12 + c2) / (s11 + s22 + c2);
        torch::Tensor v;
        if (s + 1 < scales) {
            v = cs_map.mean({2, 3});
        } else {
            const auto l_map = (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
            v = (l_map * cs_map).mean({2, 3});
        }
        v = v.clamp_min(1e-6).pow(kMsSsimWeights[s] / wsum);
        result = result.defined() ? result * v : v;
    }
    return result.mean();
}

torch::Tensor ms_ssim_loss(const torch::Tensor& pred, const torch::Tensor& target, int64_t scales,
                           const SsimOptions& opts) {
    return 1.0 - ms_ssim(pred, target, scales, opts);
}

torch::Tensor adversarial_loss(const torch::Tensor& probabilities) {
    return -torch::log(probabilities.clamp(kProbEps, 1.0 - kProbEps)).mean();
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    if (cfg_.widths.empty()) throw InvalidArgument("discriminator needs at least one stage");
    stages = register_module("stages", torch::nn::ModuleList());
    int64_t cin = 3;
    for (auto w : cfg_.widths) {
        if (w < 1) throw InvalidArgument("discriminator widths must be >= 1");
        stages->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, w, 4).stride(2).padding(1)));
        cin = w;
    }
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, 1, 3).padding(1)));
}

torch::Tensor PatchDiscriminatorImpl::logits(const torch::Tensor& residual) {
    auto x = residual;
    for (const auto& s : *stages)
        x = F::leaky_relu(s->as<torch::nn::Conv2dImpl>()->forward(x), F::LeakyReLUFuncOptions().negative_slope(cfg_.leak));
    return head(x);
}

torch::Tensor adversarial_loss(const torch::Tensor& residual, PatchDiscriminatorImpl& disc) {
    return adversarial_loss(disc.forward(residual));
}

torch::Tensor discriminator_loss(PatchDiscriminatorImpl& disc, const torch::Tensor& real, const torch::Tensor& fake) {
    const auto lr = disc.logits(real), lf = disc.logits(fake);
    return 0.5 * (F::binary_cross_entropy_with_logits(lr, torch::ones_like(lr)) +
                  F::binary_cross_entropy_with_logits(lf, torch::zeros_like(lf)));
}

JointLoss joint_loss(const LossComponents& c, const LossWeights& w) {
    validate(w);
    JointLoss out;
    const std::pair<const char*, std::pair<const torch::Tensor*, double>> terms[] = {
        {"sl1", {&c.sl1, w.sl1}},
        {"sl1_a", {&c.sl1_a, w.sl1_a}},
        {"perceptual", {&c.perceptual, w.perceptual}},
        {"msssim", {&c.msssim, w.msssim}},
        {"adversarial", {&c.adversarial, w.adversarial}},
    };
    double* slots[] = {&out.report.sl1, &out.report.sl1_a, &out.report.perceptual, &out.report.msssim,
                       &out.report.adversarial};
    int i = 0;
    for (const auto& [name, term] : terms) {
        const auto& t = *term.first;
        double* slot = slots[i++];
        if (!t.defined()) continue;
        const double v = t.item<double>();
        if (!std::isfinite(v)) throw TrainingAborted(name, std::string("loss component '") + name + "' is not finite");
        *slot = v;
        auto part = term.second * t;
        out.joint = out.joint.defined() ? out.joint + part : part;
    }
    if (!out.joint.defined()) throw InvalidArgument("joint_loss: no active component");
    out.report.joint = out.joint.item<double>();
    if (!std::isfinite(out.report.joint)) throw TrainingAborted("joint", "joint loss is not finite");
    return out;
}

LossReport joint_loss(LossReport c, const LossWeights& w) {
    validate(w);
    const std::pair<const char*, double> vals[] = {{"sl1", c.sl1},
                                                   {"sl1_a", c.sl1_a},
                                                   {"perceptual", c.perceptual},
                                                   {"msssim", c.msssim},
                                                   {"adversarial", c.adversarial}};
    for (const auto& [name, v] : vals)
        if (!std::isfinite(v)) throw TrainingAborted(name, std::string("loss component '") + name + "' is not finite");
    c.joint = w.sl1 * c.sl1 + w.sl1_a * c.sl1_a + w.perceptual * c.perceptual + w.msssim * c.msssim +
              w.adversarial * c.adversarial;
    return c;
}

}  // namespace scanet
