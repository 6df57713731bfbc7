#include "scanet/data.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "scanet/errors.hpp"
#include "scanet/png_io.hpp"

namespace scanet {
namespace fs = std::filesystem;

std::vector<PairSample> load_dataset(const fs::path& root, int64_t max_pairs) {
    const auto hazy_dir = root / "hazy", clear_dir = root / "clear";
    if (!fs::is_directory(hazy_dir)) throw IoError(hazy_dir, "dataset directory missing");
    if (!fs::is_directory(clear_dir)) throw IoError(clear_dir, "dataset directory missing");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(hazy_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (max_pairs > 0 && static_cast<int64_t>(names.size()) > max_pairs) names.resize(static_cast<std::size_t>(max_pairs));
    std::vector<PairSample> out;
    out.reserve(names.size());
    for (const auto& n : names) {
        const auto cp = clear_dir / n;
        if (!fs::exists(cp)) throw IoError(cp, "no clear image paired with hazy/" + n);
        PairSample s{fs::path(n).stem().string(), read_png(hazy_dir / n), read_png(cp)};
        if (!s.hazy.same_shape(s.clear)) throw IoError(cp, "size differs from its hazy pair");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<int64_t> patch_positions(int64_t length, int64_t patch, int64_t stride) {
    if (patch < 1 || stride < 1) throw InvalidArgument("patch and stride must be >= 1");
    if (patch > length)
        throw InvalidArgument("patch " + std::to_string(patch) + " exceeds image side " + std::to_string(length));
    std::vector<int64_t> pos;
    for (int64_t p = 0; p + patch <= length; p += stride) pos.push_back(p);
    if (pos.back() + patch < length) pos.push_back(length - patch);
    return pos;
}

Image crop(const Image& image, int64_t y, int64_t x, int64_t h, int64_t w) {
    if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > image.height || x + w > image.width)
        throw InvalidArgument("crop window outside the image");
    Image out(h, w);
    for (int c = 0; c < 3; ++c)
        for (int64_t r = 0; r < h; ++r)
            std::copy_n(&image.data[c * image.pixels() + static_cast<std::size_t>((y + r) * image.width + x)], w,
                        &out.at(c, r, 0));
    return out;
}

Image resize(const Image& image, int64_t height, int64_t width) {
    if (height < 1 || width < 1) throw InvalidArgument("resize: target size must be positive");
    if (height == image.height && width == image.width) return image;
    namespace F = torch::nn::functional;
    auto t = to_tensor(image).unsqueeze(0);
    auto r = F::interpolate(t, F::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{height, width})
                                   .mode(torch::kBilinear)
                                   .align_corners(false)
                                   .antialias(true));
    return image_from_tensor(r.clamp(0.0, 1.0));
}

Image rescale(const Image& image, double scale) {
    if (!(scale > 0)) throw InvalidArgument("rescale: scale must be > 0");
    if (scale == 1.0) return image;
    return resize(image, std::max<int64_t>(1, std::llround(image.height * scale)),
                  std::max<int64_t>(1, std::llround(image.width * scale)));
}

std::vector<PatchPair> extract_patches(const Image& hazy, const Image& clear, double scale, int64_t patch,
                                       int64_t stride) {
    if (!hazy.same_shape(clear)) throw InvalidArgument("extract_patches: hazy/clear shape mismatch");
    const auto h = rescale(hazy, scale), c = rescale(clear, scale);
    if (patch > h.height || patch > h.width)
        throw InvalidArgument("patch " + std::to_string(patch) + " larger than scaled image " +
                              std::to_string(h.height) + "x" + std::to_string(h.width));
    std::vector<PatchPair> out;
    for (auto y : patch_positions(h.height, patch, stride))
        for (auto x : patch_positions(h.width, patch, stride))
            out.push_back({crop(h, y, x, patch, patch), crop(c, y, x, patch, patch), y, x});
    return out;
}

Image rotate(const Image& image, int degrees) {
    if (degrees != 0 && degrees != 90 && degrees != 180 && degrees != 270)
        throw InvalidArgument("rotation must be 0, 90, 180 or 270 degrees, got " + std::to_string(degrees));
    const int64_t H = image.height, W = image.width;
    if (degrees == 0) return image;
    if (degrees == 180) {
        Image out(H, W);
        for (int c = 0; c < 3; ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) out.at(c, y, x) = image.at(c, H - 1 - y, W - 1 - x);
        return out;
    }
    Image out(W, H);
    for (int c = 0; c < 3; ++c)
        for (int64_t y = 0; y < W; ++y)
            for (int64_t x = 0; x < H; ++x)
                out.at(c, y, x) = degrees == 90 ? image.at(c, x, W - 1 - y) : image.at(c, H - 1 - x, y);
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out(image.height, image.width);
    for (int c = 0; c < 3; ++c)
        for (int64_t y = 0; y < image.height; ++y)
            for (int64_t x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
    return out;
}

Image flip_vertical(const Image& image) {
    Image out(image.height, image.width);
    for (int c = 0; c < 3; ++c)
        for (int64_t y = 0; y < image.height; ++y)
            for (int64_t x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - y, x);
    return out;
}

PatchPair augment(const PatchPair& pair, int degrees, bool hflip) {
    PatchPair out{rotate(pair.hazy, degrees), rotate(pair.clear, degrees), pair.y, pair.x};
    if (hflip) {
        out.hazy = flip_horizontal(out.hazy);
        out.clear = flip_horizontal(out.clear);
    }
    return out;
}

}  // namespace scanet
