#pragma once

// Image-quality metrics and model budget accounting.

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scanet/image.hpp"
#include "scanet/layer_census.hpp"
#include "scanet/losses.hpp"

namespace scanet {

class GeneratorImpl;

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) over all channels and pixels; `cap` when MSE is 0.
double psnr(const Image& pred, const Image& target, double cap = kPsnrCap);
// Mean per-image PSNR over a [B,3,H,W] (or [3,H,W]) batch.
double psnr(const torch::Tensor& pred, const torch::Tensor& target, double cap = kPsnrCap);

// Mean local SSIM of two single-channel rasters with a "valid" Gaussian
// window, computed in double precision.
double ssim(const Plane& a, const Plane& b, const SsimOptions& opts = {});
// SSIM on the BT.601 luma of both images.
double ssim(const Image& pred, const Image& target, const SsimOptions& opts = {});

struct ImageScore {
    std::string name;
    double psnr = 0, ssim = 0;
};

struct EvalResult {
    std::vector<ImageScore> images;
    double mean_psnr = 0, mean_ssim = 0;
};

EvalResult summarize(std::vector<ImageScore> images);

// Scores every PNG in `pred_dir` against the same-named file in `gt_dir`.
EvalResult evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

int64_t count_parameters(const torch::nn::Module& module);

struct ModelBudget {
    int64_t height = 0, width = 0;
    int64_t parameters = 0;
    int64_t macs = 0;
    int64_t flops = 0;  // 2 * MACs + bilinear sampling
    std::vector<LayerRecord> layers;
    std::vector<std::string> uncounted;
};

ModelBudget budget_from_census(const LayerCensus& census, int64_t height, int64_t width);
// Generator only (AGN + SRN + alpha).
ModelBudget estimate_budget(const GeneratorImpl& model, int64_t height, int64_t width);
inline int64_t estimate_flops(const GeneratorImpl& model, int64_t height, int64_t width) {
    return estimate_budget(model, height, width).flops;
}

}  // namespace scanet
