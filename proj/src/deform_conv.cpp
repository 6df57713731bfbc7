#include "scanet/deform_conv.hpp"

#include <cmath>

#include "scanet/errors.hpp"
#include "scanet/simd/deform_reference.hpp"

namespace scanet {
namespace {

using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

simd::DeformGeometry geometry(const torch::Tensor& input, const torch::Tensor& weight, const DeformConvOptions& o) {
    simd::DeformGeometry g;
    g.channels = input.size(1);
    g.in_h = input.size(2);
    g.in_w = input.size(3);
    g.kernel_h = weight.size(2);
    g.kernel_w = weight.size(3);
    g.stride = o.stride;
    g.pad = o.padding;
    g.dilation = o.dilation;
    g.out_h = (g.in_h + 2 * g.pad - g.dilation * (g.kernel_h - 1) - 1) / g.stride + 1;
    g.out_w = (g.in_w + 2 * g.pad - g.dilation * (g.kernel_w - 1) - 1) / g.stride + 1;
    return g;
}

void sample(const simd::DeformGeometry& g, const torch::Tensor& x_hwc, const torch::Tensor& off,
            torch::Tensor& cols, const simd::KernelTable& kernels) {
    if (x_hwc.scalar_type() == torch::kFloat64) {
        simd::deform_sample_reference<double>(g, x_hwc.data_ptr<double>(), off.data_ptr<double>(),
                                              cols.data_ptr<double>());
    } else {
        kernels.deform_sample(g, x_hwc.data_ptr<float>(), off.data_ptr<float>(), cols.data_ptr<float>());
    }
}

void sample_backward(const simd::DeformGeometry& g, const torch::Tensor& x_hwc, const torch::Tensor& off,
                     const torch::Tensor& gcols, torch::Tensor& gx, torch::Tensor& goff,
                     const simd::KernelTable& kernels) {
    if (x_hwc.scalar_type() == torch::kFloat64) {
        simd::deform_sample_backward_reference<double>(g, x_hwc.data_ptr<double>(), off.data_ptr<double>(),
                                                       gcols.data_ptr<double>(), gx.data_ptr<double>(),
                                                       goff.data_ptr<double>());
    } else {
        kernels.deform_sample_backward(g, x_hwc.data_ptr<float>(), off.data_ptr<float>(), gcols.data_ptr<float>(),
                                       gx.data_ptr<float>(), goff.data_ptr<float>());
    }
}

torch::Tensor channels_last(const torch::Tensor& t) { return t.permute({1, 2, 0}).contiguous(); }

class DeformConvFunction : public torch::autograd::Function<DeformConvFunction> {
public:
    static torch::Tensor forward(AutogradContext* ctx, torch::Tensor input, torch::Tensor offsets,
                                 torch::Tensor weight, torch::Tensor bias, int64_t stride, int64_t padding,
                                 int64_t dilation, int64_t kernels_id) {
        const DeformConvOptions opts{stride, padding, dilation};
        const auto g = geometry(input, weight, opts);
        const auto& kernels = table(kernels_id);
        const int64_t B = input.size(0), cout = weight.size(0), K = g.taps(), L = g.locations();
        input = input.contiguous();
        offsets = offsets.contiguous();
        // channel-major contraction, same summation order as an im2col convolution
        const auto w2 = weight.reshape({cout, g.channels * K});
        const auto bias2 = bias.reshape({cout, 1});
        auto out = torch::empty({B, cout, g.out_h, g.out_w}, input.options());
        auto cols = torch::empty({L, K * g.channels}, input.options());
        for (int64_t b = 0; b < B; ++b) {
            const auto x_hwc = channels_last(input[b]);
            const auto off = channels_last(offsets[b]);
            sample(g, x_hwc, off, cols, kernels);
            const auto cols_ck = cols.view({L, K, g.channels}).permute({2, 1, 0}).reshape({g.channels * K, L});
            out[b].view({cout, L}).copy_(torch::addmm(bias2, w2, cols_ck));
        }
        ctx->save_for_backward({input, offsets, weight});
        ctx->saved_data["stride"] = stride;
        ctx->saved_data["padding"] = padding;
        ctx->saved_data["dilation"] = dilation;
        ctx->saved_data["kernels"] = kernels_id;
        return out;
    }

    static tensor_list backward(AutogradContext* ctx, tensor_list grads) {
        const auto saved = ctx->get_saved_variables();
        const auto& input = saved[0];
        const auto& offsets = saved[1];
        const auto& weight = saved[2];
        const DeformConvOptions opts{ctx->saved_data["stride"].toInt(), ctx->saved_data["padding"].toInt(),
                                     ctx->saved_data["dilation"].toInt()};
        const auto& kernels = table(ctx->saved_data["kernels"].toInt());
        const auto g = geometry(input, weight, opts);
        const int64_t B = input.size(0), cout = weight.size(0), K = g.taps(), L = g.locations();
        const auto grad_out = grads[0].contiguous();

        auto w2 = weight.permute({0, 2, 3, 1}).reshape({cout, K * g.channels}).contiguous();
        auto grad_w2 = torch::zeros_like(w2);
        auto grad_bias = torch::zeros({cout}, input.options());
        auto grad_input = torch::empty_like(input);
        auto grad_offsets = torch::empty_like(offsets);
        auto cols = torch::empty({L, K * g.channels}, input.options());
        for (int64_t b = 0; b < B; ++b) {
            const auto x_hwc = channels_last(input[b]);
            const auto off = channels_last(offsets[b]);
            sample(g, x_hwc, off, cols, kernels);
            const auto go = grad_out[b].reshape({cout, L});
            grad_w2.addmm_(go, cols);
            grad_bias.add_(go.sum(1));
            auto gcols = go.t().mm(w2).contiguous();  // [L, K*C]
            auto gx = torch::zeros_like(x_hwc);
            auto goff = torch::empty({L, 2 * K}, input.options());
            sample_backward(g, x_hwc, off, gcols, gx, goff, kernels);
            grad_input[b].copy_(gx.permute({2, 0, 1}));
            grad_offsets[b].copy_(goff.reshape({g.out_h, g.out_w, 2 * K}).permute({2, 0, 1}));
        }
        auto grad_weight = grad_w2.reshape({cout, g.kernel_h, g.kernel_w, g.channels}).permute({0, 3, 1, 2});
        return {grad_input, grad_offsets, grad_weight, grad_bias,
                torch::Tensor(), torch::Tensor(), torch::Tensor(), torch::Tensor()};
    }

    // 0 = active table, 1 = scalar reference, 2 = avx2
    static const simd::KernelTable& table(int64_t id) {
        if (id == 1) return simd::scalar_kernels();
        if (id == 2 && simd::avx2_kernels() != nullptr) return *simd::avx2_kernels();
        return simd::active_kernels();
    }
};

torch::Tensor run(const torch::Tensor& input, const torch::Tensor& offsets, const torch::Tensor& weight,
                  const torch::Tensor& bias, const DeformConvOptions& o, int64_t kernels_id) {
    if (input.dim() != 4 || weight.dim() != 4) throw InvalidArgument("deform_conv2d: expected 4-D input and weight");
    if (input.size(1) != weight.size(1)) throw InvalidArgument("deform_conv2d: input/weight channel mismatch");
    if (input.scalar_type() != torch::kFloat32 && input.scalar_type() != torch::kFloat64)
        throw InvalidArgument("deform_conv2d: only float32/float64 are supported");
    if (o.stride < 1 || o.dilation < 1 || o.padding < 0) throw InvalidArgument("deform_conv2d: bad geometry");
    const auto g = geometry(input, weight, o);
    if (g.out_h < 1 || g.out_w < 1) throw InvalidArgument("deform_conv2d: input smaller than kernel footprint");
    const std::vector<int64_t> expect{input.size(0), 2 * g.taps(), g.out_h, g.out_w};
    if (offsets.sizes() != torch::IntArrayRef(expect))
        throw InvalidArgument("deform_conv2d: offsets must be [B, 2*kh*kw, Ho, Wo]");
    if (!torch::isfinite(offsets).all().item<bool>()) throw InvalidArgument("deform_conv2d: non-finite offsets");
    auto b = bias.defined() ? bias : torch::zeros({weight.size(0)}, input.options());
    if (b.dim() != 1 || b.size(0) != weight.size(0)) throw InvalidArgument("deform_conv2d: bias must be [Cout]");
    return DeformConvFunction::apply(input, offsets.to(input.scalar_type()), weight, b, o.stride, o.padding,
                                     o.dilation, kernels_id);
}

}  // namespace

torch::Tensor deform_conv2d(const torch::Tensor& input, const torch::Tensor& offsets, const torch::Tensor& weight,
                            const torch::Tensor& bias, const DeformConvOptions& options) {
    return run(input, offsets, weight, bias, options, 0);
}

torch::Tensor deform_conv2d(const torch::Tensor& input, const torch::Tensor& offsets, const torch::Tensor& weight,
                            const torch::Tensor& bias, const DeformConvOptions& options,
                            const simd::KernelTable& kernels) {
    const int64_t id = (&kernels == &simd::scalar_kernels()) ? 1 : (&kernels == simd::avx2_kernels() ? 2 : 0);
    return run(input, offsets, weight, bias, options, id);
}

DeformConv2dImpl::DeformConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel,
                                   DeformConvOptions options)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), options_(options) {
    // Same initialisation as torch::nn::Conv2d.
    weight = register_parameter("weight", torch::empty({out_channels, in_channels, kernel, kernel}));
    bias = register_parameter("bias", torch::empty({out_channels}));
    torch::nn::init::kaiming_uniform_(weight, std::sqrt(5.0));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
    torch::nn::init::uniform_(bias, -bound, bound);
    offset_conv = register_module(
        "offset_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, 2 * kernel * kernel, kernel)
                                             .stride(options.stride)
                                             .padding(options.padding)
                                             .dilation(options.dilation)));
    torch::NoGradGuard guard;
    offset_conv->weight.zero_();
    offset_conv->bias.zero_();
}

torch::Tensor DeformConv2dImpl::forward(const torch::Tensor& x) { return forward(x, offset_conv(x)); }

torch::Tensor DeformConv2dImpl::forward(const torch::Tensor& x, const torch::Tensor& offsets) {
    return deform_conv2d(x, offsets, weight, bias, options_);
}

void DeformConv2dImpl::describe(LayerCensus& census, const std::string& prefix, int64_t h, int64_t w) const {
    const int64_t oh = (h + 2 * options_.padding - options_.dilation * (kernel_ - 1) - 1) / options_.stride + 1;
    const int64_t ow = (w + 2 * options_.padding - options_.dilation * (kernel_ - 1) - 1) / options_.stride + 1;
    census.conv(prefix + ".offset_conv", in_channels_, 2 * kernel_ * kernel_, kernel_, oh, ow);
    census.deform_conv(prefix, in_channels_, out_channels_, kernel_, oh, ow);
}

}  // namespace scanet
