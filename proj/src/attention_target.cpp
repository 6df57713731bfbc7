#include "scanet/attention_target.hpp"

#include <torch/torch.h>

#include "scanet/errors.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet {

Plane rgb_to_y(const Image& image) {
    Plane y(image.height, image.width);
    simd::active_kernels().luma(image.channel(0).data(), image.channel(1).data(), image.channel(2).data(),
                                y.data.data(), image.pixels());
    return y;
}

AttentionMap attention_target(const Image& hazy, const Image& clear, DeviationMode mode) {
    if (!hazy.same_shape(clear)) throw InvalidArgument("attention_target: hazy and clear shapes differ");
    const Plane yh = rgb_to_y(hazy);
    const Plane yc = rgb_to_y(clear);
    AttentionMap m{Plane(hazy.height, hazy.width)};
    const auto& k = simd::active_kernels();
    if (mode == DeviationMode::absolute) {
        k.abs_diff_clip(yh.data.data(), yc.data.data(), m.values.data.data(), yh.size());
    } else {
        k.pos_diff_clip(yh.data.data(), yc.data.data(), m.values.data.data(), yh.size());
    }
    return m;
}

torch::Tensor rgb_to_y(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3)
        throw InvalidArgument("rgb_to_y: expected a [B,3,H,W] tensor");
    return 0.299 * images.select(1, 0).unsqueeze(1) + 0.587 * images.select(1, 1).unsqueeze(1) +
           0.114 * images.select(1, 2).unsqueeze(1);
}

torch::Tensor attention_target(const torch::Tensor& hazy, const torch::Tensor& clear, DeviationMode mode) {
    if (hazy.sizes() != clear.sizes()) throw InvalidArgument("attention_target: hazy and clear shapes differ");
    torch::NoGradGuard guard;
    const auto d = rgb_to_y(hazy) - rgb_to_y(clear);
    const auto m = mode == DeviationMode::absolute ? d.abs() : d;
    return m.clamp(0.0, 1.0);
}

}  // namespace scanet
