#include "scanet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>
#include <torch/torch.h>

#include "scanet/errors.hpp"
#include "scanet/png_io.hpp"
#include "scanet/runtime.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet {
namespace {

using json = nlohmann::json;

struct Bump {
    double cy, cx, sy, sx, cos_a, sin_a, amplitude;
};

float quantize8(float v) { return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f; }

Image resize_square(const Image& src, int64_t size) {
    const int64_t side = std::min(src.height, src.width);
    const int64_t y0 = (src.height - side) / 2, x0 = (src.width - side) / 2;
    auto t = to_tensor(src).slice(1, y0, y0 + side).slice(2, x0, x0 + side).unsqueeze(0);
    namespace F = torch::nn::functional;
    t = F::interpolate(t, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{size, size})
                              .mode(torch::kBilinear)
                              .align_corners(false)
                              .antialias(side > size));
    return image_from_tensor(t.clamp(0.0, 1.0));
}

void validate_unit_range(const Plane& p, const char* what) {
    for (float v : p.data) {
        if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument(std::string(what) + " values must lie in [0,1]");
    }
}

}  // namespace

TransmissionField make_transmission(int64_t height, int64_t width, double smoothness, double t_min,
                                    std::uint64_t seed, const TransmissionOptions& options) {
    if (height <= 0 || width <= 0) throw InvalidArgument("make_transmission: dimensions must be positive");
    if (!(t_min > 0.0 && t_min < 1.0)) throw InvalidArgument("make_transmission: t_min must lie in (0,1)");
    if (!(smoothness > 0.0)) throw InvalidArgument("make_transmission: smoothness must be positive");
    if (options.bumps < 1) throw InvalidArgument("make_transmission: need at least one bump");
    if (!(options.airlight >= 0.0f && options.airlight <= 1.0f))
        throw InvalidArgument("make_transmission: airlight must lie in [0,1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double extent = static_cast<double>(std::min(height, width));

    std::vector<Bump> bumps;
    for (int i = 0; i < options.bumps; ++i) {
        const double angle = unit(rng) * std::numbers::pi;
        bumps.push_back({unit(rng) * height, unit(rng) * width, smoothness * extent * (0.3 + 0.7 * unit(rng)),
                         smoothness * extent * (0.3 + 0.7 * unit(rng)), std::cos(angle), std::sin(angle),
                         0.5 + 0.5 * unit(rng)});
    }

    std::vector<double> density(static_cast<std::size_t>(height * width), 0.0);
    double peak = 0.0;
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            double f = 0.0;
            for (const auto& b : bumps) {
                const double dy = y - b.cy, dx = x - b.cx;
                const double u = (b.cos_a * dx + b.sin_a * dy) / b.sx;
                const double v = (-b.sin_a * dx + b.cos_a * dy) / b.sy;
                f += b.amplitude * std::exp(-0.5 * (u * u + v * v));
            }
            density[static_cast<std::size_t>(y * width + x)] = f;
            peak = std::max(peak, f);
        }
    }

    TransmissionField field{Plane(height, width), Plane(height, width, options.airlight)};
    for (std::size_t i = 0; i < density.size(); ++i) {
        const double d = peak > 0.0 ? density[i] / peak : 0.0;
        const double t = 1.0 - (1.0 - t_min) * d;
        field.t.data[i] = static_cast<float>(std::clamp(t, t_min, 1.0));
    }
    // float rounding of t_min must not fall below t_min
    for (auto& v : field.t.data) v = std::max(v, static_cast<float>(t_min));

    if (options.per_pixel_airlight) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        const double py = phase(rng), px = phase(rng);
        for (int64_t y = 0; y < height; ++y) {
            for (int64_t x = 0; x < width; ++x) {
                const double wobble = 0.05 * std::sin(py + 2.0 * std::numbers::pi * y / height) *
                                      std::cos(px + 2.0 * std::numbers::pi * x / width);
                field.airlight.at(y, x) = static_cast<float>(std::clamp(options.airlight + wobble, 0.0, 1.0));
            }
        }
    }
    return field;
}

Image apply_haze(const Image& clear, const Plane& t, const Plane& airlight) {
    if (clear.height != t.height || clear.width != t.width || !t.same_shape(airlight))
        throw InvalidArgument("apply_haze: image, transmission and airlight shapes differ");
    validate_unit_range(t, "transmission");
    validate_unit_range(airlight, "airlight");
    Image out(clear.height, clear.width);
    const auto& k = simd::active_kernels();
    for (int c = 0; c < 3; ++c) {
        k.haze(clear.channel(c).data(), t.data.data(), airlight.data.data(), out.channel(c).data(), clear.pixels());
    }
    return out;
}

Image apply_haze(const Image& clear, const Plane& t, float airlight) {
    if (t.height <= 0) throw InvalidArgument("apply_haze: empty transmission");
    return apply_haze(clear, t, Plane(t.height, t.width, airlight));
}

Image procedural_clear_image(int64_t size, std::uint64_t seed) {
    if (size <= 0) throw InvalidArgument("procedural_clear_image: size must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    Image img(size, size);

    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = unit(rng);
        c1[c] = unit(rng);
    }
    const float angle = unit(rng) * 2.0f * std::numbers::pi_v<float>;
    const float ca = std::cos(angle), sa = std::sin(angle);
    const int64_t cell = 4 + static_cast<int64_t>(unit(rng) * size / 6.0f);
    const float checker_amp = 0.25f * unit(rng);
    for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
            const float u = 0.5f + 0.5f * (ca * (x / float(size) - 0.5f) + sa * (y / float(size) - 0.5f)) * 1.4142f;
            const float s = std::clamp(u, 0.0f, 1.0f);
            const float chk = ((x / cell + y / cell) % 2 == 0) ? checker_amp : -checker_amp;
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1.0f - s) * c0[c] + s * c1[c] + chk;
        }
    }

    std::uniform_int_distribution<int> nshapes(3, 7);
    const int n = nshapes(rng);
    for (int i = 0; i < n; ++i) {
        const bool circle = unit(rng) < 0.5f;
        const float cy = unit(rng) * size, cx = unit(rng) * size;
        const float ry = (0.05f + 0.2f * unit(rng)) * size, rx = (0.05f + 0.2f * unit(rng)) * size;
        float col[3];
        for (auto& v : col) v = unit(rng);
        for (int64_t y = 0; y < size; ++y) {
            for (int64_t x = 0; x < size; ++x) {
                const float dy = (y - cy) / ry, dx = (x - cx) / rx;
                const bool inside = circle ? (dy * dy + dx * dx <= 1.0f) : (std::fabs(dy) <= 1.0f && std::fabs(dx) <= 1.0f);
                if (!inside) continue;
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
            }
        }
    }
    for (auto& v : img.data) v = quantize8(v);
    return img;
}

SynthPair make_pair(int64_t size, std::uint64_t seed, const HazeParams& params) {
    SynthPair pair;
    pair.seed = seed;
    pair.clear = procedural_clear_image(size, mix_seed(seed, 0));
    pair.field = make_transmission(size, size, params.smoothness, params.t_min, mix_seed(seed, 1), params.transmission);
    pair.hazy = apply_haze(pair.clear, pair.field);
    return pair;
}

namespace {

json params_to_json(const HazeParams& p) {
    return json{{"smoothness", p.smoothness},
                {"t_min", p.t_min},
                {"bumps", p.transmission.bumps},
                {"airlight", p.transmission.airlight},
                {"per_pixel_airlight", p.transmission.per_pixel_airlight}};
}

HazeParams params_from_json(const json& j) {
    HazeParams p;
    p.smoothness = j.at("smoothness").get<double>();
    p.t_min = j.at("t_min").get<double>();
    p.transmission.bumps = j.at("bumps").get<int>();
    p.transmission.airlight = j.at("airlight").get<float>();
    p.transmission.per_pixel_airlight = j.at("per_pixel_airlight").get<bool>();
    return p;
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    }
    if (ec) throw IoError(dir, "cannot list directory");
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

DatasetManifest generate_dataset(int64_t n_pairs, int64_t size, const std::filesystem::path& out_dir,
                                 std::uint64_t seed, const DatasetOptions& options) {
    if (n_pairs < 0) throw InvalidArgument("generate_dataset: pair count must be non-negative");
    if (size < 16) throw InvalidArgument("generate_dataset: size must be at least 16");

    std::vector<std::filesystem::path> sources;
    if (options.clear_source) {
        sources = list_pngs(*options.clear_source);
        if (sources.empty() && n_pairs > 0) throw IoError(*options.clear_source, "no PNG files in clear source");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "clear", ec);
    if (ec) throw IoError(out_dir / "clear", "cannot create directory");
    std::filesystem::create_directories(out_dir / "hazy", ec);
    if (ec) throw IoError(out_dir / "hazy", "cannot create directory");

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.size = size;
    manifest.params = options.params;
    manifest.clear_source = options.clear_source;

    for (int64_t i = 0; i < n_pairs; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "pair_%04lld", static_cast<long long>(i));
        const std::uint64_t pair_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        SynthPair pair;
        if (options.clear_source) {
            pair.seed = pair_seed;
            pair.clear = resize_square(read_png(sources[static_cast<std::size_t>(i) % sources.size()]), size);
            for (auto& v : pair.clear.data) v = quantize8(v);
            pair.field = make_transmission(size, size, options.params.smoothness, options.params.t_min,
                                           mix_seed(pair_seed, 1), options.params.transmission);
            pair.hazy = apply_haze(pair.clear, pair.field);
        } else {
            pair = make_pair(size, pair_seed, options.params);
        }
        write_png(out_dir / "clear" / (std::string(name) + ".png"), pair.clear);
        write_png(out_dir / "hazy" / (std::string(name) + ".png"), pair.hazy);
        manifest.entries.push_back({name, pair_seed});
    }

    json j;
    j["format"] = "scanet-synth-v1";
    j["seed"] = seed;
    j["size"] = size;
    j["params"] = params_to_json(options.params);
    j["clear_source"] = options.clear_source ? json(options.clear_source->string()) : json(nullptr);
    j["pairs"] = json::array();
    for (const auto& e : manifest.entries) j["pairs"].push_back({{"name", e.name}, {"seed", e.seed}});
    const auto path = out_dir / "manifest.json";
    std::ofstream os(path);
    if (!os) throw IoError(path, "cannot write manifest");
    os << j.dump(2) << "\n";
    if (!os) throw IoError(path, "cannot write manifest");
    return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError(path, "cannot open manifest");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(path, std::string("malformed manifest (") + e.what() + ")");
    }
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.size = j.at("size").get<int64_t>();
    m.params = params_from_json(j.at("params"));
    if (!j.at("clear_source").is_null()) m.clear_source = j.at("clear_source").get<std::string>();
    for (const auto& e : j.at("pairs")) m.entries.push_back({e.at("name").get<std::string>(), e.at("seed").get<std::uint64_t>()});
    return m;
}

}  // namespace scanet
