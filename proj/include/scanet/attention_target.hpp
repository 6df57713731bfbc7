#pragma once

// Ground-truth attention from the luminance (BT.601 Y) deviation between a
// hazy image and its clear counterpart.

#include <torch/types.h>

#include "scanet/image.hpp"

namespace scanet {

enum class DeviationMode {
    absolute,  // |Y_hazy - Y_clear|
    brightening,  // max(Y_hazy - Y_clear, 0): only where haze raised luminance
};

// Y = 0.299 R + 0.587 G + 0.114 B
Plane rgb_to_y(const Image& image);

AttentionMap attention_target(const Image& hazy, const Image& clear, DeviationMode mode = DeviationMode::absolute);

// Batched variants on [B,3,H,W] tensors; results are [B,1,H,W] and carry no
// autograd history.
torch::Tensor rgb_to_y(const torch::Tensor& images);
torch::Tensor attention_target(const torch::Tensor& hazy, const torch::Tensor& clear,
                               DeviationMode mode = DeviationMode::absolute);

}  // namespace scanet
