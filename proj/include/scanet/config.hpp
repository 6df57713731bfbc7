#pragma once

// Training and run configuration with a strict JSON mapping: unknown keys
// are rejected, missing keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scanet/curriculum.hpp"
#include "scanet/losses.hpp"
#include "scanet/model.hpp"

namespace scanet {

struct AblationFlags {
    bool use_agn = true;
    bool use_sl1a = true;
    bool use_scl = true;
    bool use_perceptual = true;
    bool use_msssim = true;
    bool use_adversarial = true;
};

bool operator==(const AblationFlags& a, const AblationFlags& b);

// Rows (1)..(7) of the ablation table: (1) SRN with smooth L1 only,
// (2) + AGN, (3) + attention supervision, (4) + curriculum, (5) + perceptual,
// (6) + MS-SSIM, (7) + adversarial.
AblationFlags ablation_preset(int row);
std::string ablation_label(int row);

struct TrainConfig {
    int64_t epochs = 40;
    int64_t max_steps = 0;  // 0: no limit
    double lr = 1e-4;
    int64_t batch = 2;
    double lr_decay = 0.5;
    int64_t lr_decay_period = 150;  // epochs
    std::vector<double> scales{0.5, 0.7, 1.0};
    int64_t patch = 128;
    int64_t stride = 96;
    std::vector<int> rotations{0, 90, 180, 270};
    bool hflip = false;
    std::uint64_t seed = 0;
    int64_t max_pairs = 0;  // 0: whole dataset
    AblationFlags flags;
    CurriculumConfig curriculum;
    LossWeights weights;
    int64_t msssim_scales = 5;  // upper bound; reduced to what the patch allows
    DiscriminatorConfig discriminator;
    FeatureExtractorConfig perceptual;
    int64_t sample_every = 0;      // steps; 0 disables
    int64_t checkpoint_every = 0;  // epochs; the final checkpoint is always written
};

void validate(const TrainConfig& cfg);

// lr0 * decay^floor(epoch / period)
double learning_rate(const TrainConfig& cfg, int64_t epoch);

struct RunConfig {
    std::string name = "default";
    std::filesystem::path data;
    std::filesystem::path run_root = "run";
    ModelConfig model;
    TrainConfig train;

    std::filesystem::path run_dir() const { return run_root / name; }
};

// Copies the ablation AGN switch into the model config and validates.
RunConfig resolve(RunConfig cfg);

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace scanet
