#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <torch/types.h>

namespace scanet {

// Single-channel float raster, row-major.
struct Plane {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> data;

    Plane() = default;
    Plane(int64_t h, int64_t w, float fill = 0.0f);

    std::size_t size() const noexcept { return data.size(); }
    float& at(int64_t y, int64_t x) { return data[static_cast<std::size_t>(y * width + x)]; }
    float at(int64_t y, int64_t x) const { return data[static_cast<std::size_t>(y * width + x)]; }
    bool same_shape(const Plane& o) const noexcept { return height == o.height && width == o.width; }
};

// RGB raster in [0,1], stored planar (R plane, G plane, B plane) so it maps
// directly onto a [3,H,W] tensor.
struct Image {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> data;

    Image() = default;
    Image(int64_t h, int64_t w, float fill = 0.0f);

    std::size_t pixels() const noexcept { return static_cast<std::size_t>(height * width); }
    std::span<float> channel(int c) { return {data.data() + c * pixels(), pixels()}; }
    std::span<const float> channel(int c) const { return {data.data() + c * pixels(), pixels()}; }
    float& at(int c, int64_t y, int64_t x) { return data[c * pixels() + static_cast<std::size_t>(y * width + x)]; }
    float at(int c, int64_t y, int64_t x) const { return data[c * pixels() + static_cast<std::size_t>(y * width + x)]; }
    bool same_shape(const Image& o) const noexcept { return height == o.height && width == o.width; }
};

// Attention map: single channel, every value in [0,1].
struct AttentionMap {
    Plane values;
};

// [3,H,W] float tensor (copy).
torch::Tensor to_tensor(const Image& image);
// [1,H,W] float tensor (copy).
torch::Tensor to_tensor(const Plane& plane);
// Accepts [3,H,W] or [1,3,H,W].
Image image_from_tensor(const torch::Tensor& t);
// Accepts [H,W], [1,H,W] or [1,1,H,W].
Plane plane_from_tensor(const torch::Tensor& t);
// Stacks equally-sized images into [B,3,H,W].
torch::Tensor stack_images(std::span<const Image> images);

}  // namespace scanet
