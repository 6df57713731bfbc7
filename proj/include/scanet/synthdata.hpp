#pragma once

// Paired (hazy, clear) data from the atmospheric scattering model
// I = J*t + A*(1 - t) with a smooth, spatially varying transmission t.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scanet/image.hpp"

namespace scanet {

struct TransmissionField {
    Plane t;         // (0,1]
    Plane airlight;  // [0,1]; constant unless per-pixel airlight was requested
};

struct TransmissionOptions {
    int bumps = 4;
    float airlight = 0.9f;
    // Adds a smooth per-pixel variation of +-0.05 around `airlight`.
    bool per_pixel_airlight = false;
};

// Sum of `bumps` random anisotropic Gaussians (widths proportional to
// smoothness * min(h, w)), normalized by its peak and mapped to [t_min, 1]
// with dense haze where the bumps peak. smoothness = +inf yields the constant
// field t_min.
TransmissionField make_transmission(int64_t height, int64_t width, double smoothness, double t_min,
                                    std::uint64_t seed, const TransmissionOptions& options = {});

// I = J*t + A*(1 - t), clipped to [0,1].
Image apply_haze(const Image& clear, const Plane& t, const Plane& airlight);
Image apply_haze(const Image& clear, const Plane& t, float airlight);
inline Image apply_haze(const Image& clear, const TransmissionField& field) {
    return apply_haze(clear, field.t, field.airlight);
}

// Gradients, checkerboards and random colored shapes.
Image procedural_clear_image(int64_t size, std::uint64_t seed);

struct SynthPair {
    Image clear;
    Image hazy;
    TransmissionField field;
    std::uint64_t seed = 0;
};

struct HazeParams {
    double smoothness = 0.35;
    double t_min = 0.3;
    TransmissionOptions transmission;
};

SynthPair make_pair(int64_t size, std::uint64_t seed, const HazeParams& params = {});

struct ManifestEntry {
    std::string name;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    int64_t size = 0;
    HazeParams params;
    std::optional<std::filesystem::path> clear_source;
    std::vector<ManifestEntry> entries;
};

struct DatasetOptions {
    HazeParams params;
    // Directory of clear PNGs to haze instead of procedural scenes. Images
    // are center-cropped to a square and resized to `size`.
    std::optional<std::filesystem::path> clear_source;
};

// Writes <out>/clear/<name>.png, <out>/hazy/<name>.png and <out>/manifest.json.
DatasetManifest generate_dataset(int64_t n_pairs, int64_t size, const std::filesystem::path& out_dir,
                                 std::uint64_t seed, const DatasetOptions& options = {});

DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace scanet
