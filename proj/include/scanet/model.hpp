#pragma once

// Full generator: attention generator, scene reconstruction network and the
// learnable attention gates, registered as agn.*, srn.* and alpha.*.

#include <optional>

#include <torch/torch.h>

#include "scanet/agn.hpp"
#include "scanet/layer_census.hpp"
#include "scanet/srn.hpp"

namespace scanet {

struct ModelConfig {
    static constexpr int kVersion = 1;

    int version = kVersion;
    AGNConfig agn;
    SRNConfig srn;
    // Without the AGN the SRN runs with no attention injection.
    bool use_agn = true;
};

void validate(const ModelConfig& cfg);

struct GeneratorOutput {
    torch::Tensor dehazed;        // [B,3,H,W] in [0,1]
    torch::Tensor predicted_map;  // M_g, undefined without AGN
};

class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const ModelConfig& cfg);

    // Inference path: the SRN is driven by the predicted map.
    GeneratorOutput forward(const torch::Tensor& hazy);
    // SRN with an externally supplied (e.g. blended) attention map.
    torch::Tensor reconstruct(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map);

    void describe(LayerCensus& census, int64_t h, int64_t w) const;
    const ModelConfig& config() const noexcept { return cfg_; }
    bool has_agn() const noexcept { return !agn.is_empty(); }

    AttentionGenerator agn{nullptr};
    SceneReconstruction srn{nullptr};
    AttentionGates alpha{nullptr};

private:
    ModelConfig cfg_;
};
TORCH_MODULE(Generator);

}  // namespace scanet
