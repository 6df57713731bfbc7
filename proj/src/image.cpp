#include "scanet/image.hpp"

#include <algorithm>

#include <torch/torch.h>

#include "scanet/errors.hpp"

namespace scanet {

Plane::Plane(int64_t h, int64_t w, float fill) : height(h), width(w) {
    if (h <= 0 || w <= 0) throw InvalidArgument("plane dimensions must be positive");
    data.assign(static_cast<std::size_t>(h * w), fill);
}

Image::Image(int64_t h, int64_t w, float fill) : height(h), width(w) {
    if (h <= 0 || w <= 0) throw InvalidArgument("image dimensions must be positive");
    data.assign(static_cast<std::size_t>(3 * h * w), fill);
}

torch::Tensor to_tensor(const Image& image) {
    return torch::from_blob(const_cast<float*>(image.data.data()), {3, image.height, image.width},
                            torch::kFloat32)
        .clone();
}

torch::Tensor to_tensor(const Plane& plane) {
    return torch::from_blob(const_cast<float*>(plane.data.data()), {1, plane.height, plane.width},
                            torch::kFloat32)
        .clone();
}

Image image_from_tensor(const torch::Tensor& t) {
    auto x = t.detach();
    if (x.dim() == 4 && x.size(0) == 1) x = x.squeeze(0);
    if (x.dim() != 3 || x.size(0) != 3) throw InvalidArgument("expected a [3,H,W] tensor");
    x = x.to(torch::kCPU, torch::kFloat32).contiguous();
    Image out(x.size(1), x.size(2));
    std::copy_n(x.data_ptr<float>(), out.data.size(), out.data.begin());
    return out;
}

Plane plane_from_tensor(const torch::Tensor& t) {
    auto x = t.detach();
    while (x.dim() > 2 && x.size(0) == 1) x = x.squeeze(0);
    if (x.dim() != 2) throw InvalidArgument("expected a single-channel tensor");
    x = x.to(torch::kCPU, torch::kFloat32).contiguous();
    Plane out(x.size(0), x.size(1));
    std::copy_n(x.data_ptr<float>(), out.data.size(), out.data.begin());
    return out;
}

torch::Tensor stack_images(std::span<const Image> images) {
    std::vector<torch::Tensor> ts;
    ts.reserve(images.size());
    for (const auto& im : images) {
        if (!im.same_shape(images.front())) throw InvalidArgument("stack_images: shape mismatch");
        ts.push_back(to_tensor(im));
    }
    return torch::stack(ts);
}

}  // namespace scanet
