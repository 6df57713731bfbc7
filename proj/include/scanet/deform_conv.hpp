#pragma once

// Deformable convolution (one offset group): every kernel tap samples the
// input at its regular grid position plus a learned (dy, dx) offset using
// bilinear interpolation with zero padding outside the image, then the
// samples are contracted with the kernel weights.

#include <string>

#include <torch/torch.h>

#include "scanet/layer_census.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet {

struct DeformConvOptions {
    int64_t stride = 1;
    int64_t padding = 1;
    int64_t dilation = 1;
};

// input [B,C,H,W]; offsets [B, 2*kh*kw, Ho, Wo] laid out (dy, dx) per tap in
// row-major tap order; weight [Cout,C,kh,kw]; bias [Cout] or undefined.
// float32 and float64 are supported; gradients flow to all four tensors.
torch::Tensor deform_conv2d(const torch::Tensor& input, const torch::Tensor& offsets, const torch::Tensor& weight,
                            const torch::Tensor& bias, const DeformConvOptions& options = {});

// Same op with an explicit kernel table for float inputs (used to compare
// kernel variants end to end).
torch::Tensor deform_conv2d(const torch::Tensor& input, const torch::Tensor& offsets, const torch::Tensor& weight,
                            const torch::Tensor& bias, const DeformConvOptions& options,
                            const simd::KernelTable& kernels);

class DeformConv2dImpl : public torch::nn::Module {
public:
    DeformConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel = 3, DeformConvOptions options = {});

    // Predicts offsets from x with the zero-initialised offset conv.
    torch::Tensor forward(const torch::Tensor& x);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& offsets);
    void describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const;

    torch::Tensor weight, bias;
    torch::nn::Conv2d offset_conv{nullptr};

private:
    int64_t in_channels_, out_channels_, kernel_;
    DeformConvOptions options_;
};
TORCH_MODULE(DeformConv2d);

}  // namespace scanet
