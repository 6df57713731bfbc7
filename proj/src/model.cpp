#include "scanet/model.hpp"

#include "scanet/errors.hpp"

namespace scanet {

void validate(const ModelConfig& cfg) {
    if (cfg.version != ModelConfig::kVersion)
        throw ConfigError("model config version " + std::to_string(cfg.version) + " is not supported (expected " +
                          std::to_string(ModelConfig::kVersion) + ")");
    validate(cfg.agn);
    validate(cfg.srn);
}

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    if (cfg_.use_agn) agn = register_module("agn", AttentionGenerator(cfg_.agn));
    srn = register_module("srn", SceneReconstruction(cfg_.srn));
    if (cfg_.use_agn)
        alpha = register_module("alpha", AttentionGates(cfg_.srn.inject_input, cfg_.srn.inject_bottleneck));
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& hazy) {
    GeneratorOutput out;
    if (has_agn()) {
        out.predicted_map = agn->forward(hazy).map;
        out.dehazed = srn->forward(hazy, out.predicted_map, alpha.get());
    } else {
        out.dehazed = srn->forward(hazy);
    }
    return out;
}

torch::Tensor GeneratorImpl::reconstruct(const torch::Tensor& hazy, const std::optional<torch::Tensor>& map) {
    if (map && !has_agn()) throw InvalidArgument("attention map given to a generator built without AGN");
    return map ? srn->forward(hazy, map, alpha.get()) : srn->forward(hazy);
}

void GeneratorImpl::describe(LayerCensus& census, int64_t h, int64_t w) const {
    if (has_agn()) {
        agn->describe(census, "agn", h, w);
        census.scalar_params("alpha", static_cast<int64_t>(alpha->parameters().size()));
    }
    srn->describe(census, "srn", h, w);
}

}  // namespace scanet
