#pragma once

// Training objectives: smooth L1 (image and attention), VGG-style perceptual
// distance, MS-SSIM, the residual adversarial term, the patch discriminator
// and the weighted joint loss.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace scanet {

struct LossWeights {
    double sl1 = 1.0;
    double sl1_a = 0.3;
    double perceptual = 0.01;
    double msssim = 0.5;
    double adversarial = 0.0005;
};

void validate(const LossWeights& w);

// Mean over all elements of 0.5 q^2 (|q| < 1) or |q| - 0.5.
torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target);

// ---- perceptual ----------------------------------------------------------

struct FeatureExtractorConfig {
    // Widths of the three VGG16 stages up to relu3_3.
    int64_t width1 = 64, width2 = 128, width3 = 256;
    // Seed of the fixed random weights used when no weights file is given.
    std::uint64_t seed = 1234;
    // Tensor archive written by torch::save with entries conv1_1 ... conv3_3.
    std::optional<std::filesystem::path> weights;
};

// VGG16 layers conv1_1 .. conv3_3 returning relu1_2, relu2_2 and relu3_3.
// Weights are frozen.
class FeatureExtractorImpl : public torch::nn::Module {
public:
    explicit FeatureExtractorImpl(const FeatureExtractorConfig& cfg = {});

    std::vector<torch::Tensor> forward(const torch::Tensor& images);
    bool pretrained() const noexcept { return pretrained_; }

    torch::nn::Conv2d conv1_1{nullptr}, conv1_2{nullptr}, conv2_1{nullptr}, conv2_2{nullptr}, conv3_1{nullptr},
        conv3_2{nullptr}, conv3_3{nullptr};

private:
    bool pretrained_ = false;
};
TORCH_MODULE(FeatureExtractor);

// Mean over layers of ||a_k - b_k||^2 / (C_k H_k W_k), averaged over the
// batch.
torch::Tensor perceptual_from_features(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, FeatureExtractorImpl& extractor);

// ---- MS-SSIM -------------------------------------------------------------

struct SsimOptions {
    int64_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double data_range = 1.0;
};

inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_taps(int64_t size, double sigma);

// Largest scale count (<= 5) for which min(h, w) >= 2^(s-1) * window; 0 when
// even one scale does not fit.
int64_t max_ms_ssim_scales(int64_t height, int64_t width, int64_t window = 11);

// Per-channel MS-SSIM on [B,C,H,W] averaged over batch and channels. With
// fewer than 5 scales the leading exponents are renormalized to sum to 1, so
// scales = 1 is plain SSIM. Throws when the image is too small.
torch::Tensor ms_ssim(const torch::Tensor& pred, const torch::Tensor& target, int64_t scales = 5,
                      const SsimOptions& opts = {});
torch::Tensor ms_ssim_loss(const torch::Tensor& pred, const torch::Tensor& target, int64_t scales = 5,
                           const SsimOptions& opts = {});

// ---- adversarial ---------------------------------------------------------

inline constexpr double kProbEps = 1e-7;

// -mean(log D), D clamped to [eps, 1 - eps].
torch::Tensor adversarial_loss(const torch::Tensor& probabilities);

struct DiscriminatorConfig {
    std::vector<int64_t> widths{32, 64, 128};
    double leak = 0.2;
    // Std of the noise added to the zero residual used as the real sample.
    double real_noise = 0.02;
};

// Strided 4x4 conv stages with LeakyReLU, then a 3x3 conv to one channel.
// 64x64 input -> 8x8 patch grid.
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    explicit PatchDiscriminatorImpl(const DiscriminatorConfig& cfg = {});

    torch::Tensor logits(const torch::Tensor& residual);
    torch::Tensor forward(const torch::Tensor& residual) { return torch::sigmoid(logits(residual)); }
    const DiscriminatorConfig& config() const noexcept { return cfg_; }

    torch::nn::ModuleList stages{nullptr};
    torch::nn::Conv2d head{nullptr};

private:
    DiscriminatorConfig cfg_;
};
TORCH_MODULE(PatchDiscriminator);

torch::Tensor adversarial_loss(const torch::Tensor& residual, PatchDiscriminatorImpl& disc);

// Binary real/fake objective for the discriminator step. `fake` should be
// detached from the generator.
torch::Tensor discriminator_loss(PatchDiscriminatorImpl& disc, const torch::Tensor& real, const torch::Tensor& fake);

// ---- joint ---------------------------------------------------------------

// Undefined tensors are inactive terms and contribute 0.
struct LossComponents {
    torch::Tensor sl1, sl1_a, perceptual, msssim, adversarial;
};

struct LossReport {
    double sl1 = 0, sl1_a = 0, perceptual = 0, msssim = 0, adversarial = 0, joint = 0;
};

struct JointLoss {
    torch::Tensor joint;
    LossReport report;
};

// Throws TrainingAborted naming the first non-finite component.
JointLoss joint_loss(const LossComponents& c, const LossWeights& w = {});
// Scalar version; fills in `joint`.
LossReport joint_loss(LossReport c, const LossWeights& w = {});

}  // namespace scanet
