#pragma once

// Paired dataset loading, multi-scale patch grids and rotation/flip
// augmentation.

#include <filesystem>
#include <string>
#include <vector>

#include "scanet/image.hpp"
#include "scanet/synthdata.hpp"

namespace scanet {

struct PairSample {
    std::string name;
    Image hazy;
    Image clear;
};

// Every <root>/hazy/<name>.png with its <root>/clear/<name>.png, sorted by
// name. max_pairs > 0 keeps the first max_pairs.
std::vector<PairSample> load_dataset(const std::filesystem::path& root, int64_t max_pairs = 0);

// Top-left offsets {0, stride, 2*stride, ...} that fit, plus length - patch
// when the grid stops short of the far edge.
std::vector<int64_t> patch_positions(int64_t length, int64_t patch, int64_t stride);

struct PatchPair {
    Image hazy;
    Image clear;
    int64_t y = 0, x = 0;  // top-left in the scaled image
};

Image crop(const Image& image, int64_t y, int64_t x, int64_t h, int64_t w);
// Antialiased bilinear resize.
Image resize(const Image& image, int64_t height, int64_t width);
// round(H * scale) x round(W * scale); scale 1 returns a copy.
Image rescale(const Image& image, double scale);

std::vector<PatchPair> extract_patches(const Image& hazy, const Image& clear, double scale, int64_t patch,
                                       int64_t stride);
inline std::vector<PatchPair> extract_patches(const SynthPair& pair, double scale, int64_t patch, int64_t stride) {
    return extract_patches(pair.hazy, pair.clear, scale, patch, stride);
}

// Counter-clockwise rotation by 0, 90, 180 or 270 degrees.
Image rotate(const Image& image, int degrees);
Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);

// Same rotation (then optional horizontal flip) on both images.
PatchPair augment(const PatchPair& pair, int degrees, bool hflip = false);

}  // namespace scanet
