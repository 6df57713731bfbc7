#include "scanet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "scanet/attention_target.hpp"
#include "scanet/errors.hpp"
#include "scanet/model.hpp"
#include "scanet/png_io.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet {
namespace {

double psnr_from_mse(double mse, double cap) {
    if (mse <= 0.0) return cap;
    return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

// Separable valid filter: rows x cols -> (rows-n+1) x (cols-n+1).
std::vector<double> filter2d(const simd::KernelTable& k, const std::vector<double>& in, std::size_t rows,
                             std::size_t cols, const std::vector<double>& taps, std::vector<double>& scratch) {
    const std::size_t n = taps.size();
    scratch.resize(rows * (cols - n + 1));
    k.filter_rows(in.data(), scratch.data(), rows, cols, taps.data(), n);
    std::vector<double> out((rows - n + 1) * (cols - n + 1));
    k.filter_cols(scratch.data(), out.data(), rows, cols - n + 1, taps.data(), n);
    return out;
}

}  // namespace

double psnr(const Image& pred, const Image& target, double cap) {
    if (!pred.same_shape(target)) throw InvalidArgument("psnr: shape mismatch");
    if (pred.data.empty()) throw InvalidArgument("psnr: empty image");
    const double sse = simd::active_kernels().sum_sq_diff(pred.data.data(), target.data.data(), pred.data.size());
    return psnr_from_mse(sse / static_cast<double>(pred.data.size()), cap);
}

double psnr(const torch::Tensor& pred, const torch::Tensor& target, double cap) {
    if (pred.sizes() != target.sizes()) throw InvalidArgument("psnr: shape mismatch");
    auto p = pred.detach().to(torch::kDouble), t = target.detach().to(torch::kDouble);
    if (p.dim() == 3) p = p.unsqueeze(0), t = t.unsqueeze(0);
    if (p.dim() != 4) throw InvalidArgument("psnr: expected [B,C,H,W] or [C,H,W]");
    const auto mse = (p - t).pow(2).flatten(1).mean(1);
    double total = 0.0;
    for (int64_t b = 0; b < mse.size(0); ++b) total += psnr_from_mse(mse[b].item<double>(), cap);
    return total / static_cast<double>(mse.size(0));
}

double ssim(const Plane& a, const Plane& b, const SsimOptions& opts) {
    if (!a.same_shape(b)) throw InvalidArgument("ssim: shape mismatch");
    if (a.height < opts.window || a.width < opts.window)
        throw InvalidArgument("ssim: image must be at least " + std::to_string(opts.window) + " pixels per side");
    const auto& k = simd::active_kernels();
    const auto taps = gaussian_taps(opts.window, opts.sigma);
    const auto rows = static_cast<std::size_t>(a.height), cols = static_cast<std::size_t>(a.width);
    const std::size_t n = rows * cols;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a.data[i];
        y[i] = b.data[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    std::vector<double> scratch;
    const auto mx = filter2d(k, x, rows, cols, taps, scratch);
    const auto my = filter2d(k, y, rows, cols, taps, scratch);
    const auto sxx = filter2d(k, xx, rows, cols, taps, scratch);
    const auto syy = filter2d(k, yy, rows, cols, taps, scratch);
    const auto sxy = filter2d(k, xy, rows, cols, taps, scratch);
    const double c1 = std::pow(opts.k1 * opts.data_range, 2), c2 = std::pow(opts.k2 * opts.data_range, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double ssim(const Image& pred, const Image& target, const SsimOptions& opts) {
    if (!pred.same_shape(target)) throw InvalidArgument("ssim: shape mismatch");
    return ssim(rgb_to_y(pred), rgb_to_y(target), opts);
}

EvalResult summarize(std::vector<ImageScore> images) {
    EvalResult r;
    r.images = std::move(images);
    for (const auto& s : r.images) {
        r.mean_psnr += s.psnr;
        r.mean_ssim += s.ssim;
    }
    if (!r.images.empty()) {
        r.mean_psnr /= static_cast<double>(r.images.size());
        r.mean_ssim /= static_cast<double>(r.images.size());
    }
    return r;
}

EvalResult evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(pred_dir)) throw IoError(pred_dir, "not a directory");
    if (!fs::is_directory(gt_dir)) throw IoError(gt_dir, "not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<ImageScore> scores;
    for (const auto& f : files) {
        const auto gt_path = gt_dir / f.filename();
        if (!fs::exists(gt_path)) throw IoError(gt_path, "missing ground truth for " + f.filename().string());
        const auto pred = read_png(f), gt = read_png(gt_path);
        if (!pred.same_shape(gt)) throw IoError(f, "size differs from ground truth");
        scores.push_back({f.filename().string(), psnr(pred, gt), ssim(pred, gt)});
    }
    return summarize(std::move(scores));
}

int64_t count_parameters(const torch::nn::Module& module) {
    int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

ModelBudget budget_from_census(const LayerCensus& census, int64_t height, int64_t width) {
    ModelBudget b;
    b.height = height;
    b.width = width;
    b.parameters = census.params();
    b.macs = census.macs();
    b.flops = census.flops();
    b.layers = census.records();
    b.uncounted = census.uncounted_layers();
    return b;
}

ModelBudget estimate_budget(const GeneratorImpl& model, int64_t height, int64_t width) {
    if (height < 1 || width < 1) throw InvalidArgument("estimate_budget: input size must be positive");
    LayerCensus census;
    model.describe(census, height, width);
    return budget_from_census(census, height, width);
}

}  // namespace scanet
