#pragma once

// Binary checkpoint: "SCANETCK", format version, a JSON header (config
// snapshot, epoch, step, curriculum state) and named tensors. Writing is
// deterministic, so save -> load -> save reproduces the same bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "scanet/config.hpp"
#include "scanet/losses.hpp"
#include "scanet/model.hpp"

namespace scanet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
    nlohmann::json header;
    std::vector<std::pair<std::string, torch::Tensor>> entries;

    const torch::Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
// Refuses other magic values and format versions.
CheckpointData read_checkpoint(const std::filesystem::path& path);

struct TrainingState {
    int64_t epoch = 0;  // completed epochs
    int64_t step = 0;   // completed optimizer steps
    std::optional<double> curriculum_ema;
};

struct TrainingObjects {
    GeneratorImpl* generator = nullptr;
    PatchDiscriminatorImpl* discriminator = nullptr;
    torch::optim::Adam* generator_optim = nullptr;
    torch::optim::Adam* discriminator_optim = nullptr;
};

CheckpointData capture(const TrainingObjects& objs, const RunConfig& cfg, const TrainingState& state);
// Copies every entry into the objects. Missing entries and shape mismatches
// raise ConfigError naming the entry.
void restore(const CheckpointData& data, const TrainingObjects& objs);

RunConfig checkpoint_config(const CheckpointData& data);
TrainingState checkpoint_state(const CheckpointData& data);

void save_checkpoint(const std::filesystem::path& path, const TrainingObjects& objs, const RunConfig& cfg,
                     const TrainingState& state);

// Builds the generator described by the checkpoint and loads its weights.
Generator load_generator(const std::filesystem::path& path);

}  // namespace scanet
