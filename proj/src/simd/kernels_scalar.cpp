#include <algorithm>
#include <cmath>

#include "scanet/simd/deform_reference.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet::simd {
namespace {

void haze(const float* clear, const float* t, const float* airlight, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float v = clear[i] * t[i] + airlight[i] * (1.0f - t[i]);
        out[i] = std::clamp(v, 0.0f, 1.0f);
    }
}

void luma(const float* r, const float* g, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
}

void abs_diff_clip(const float* a, const float* b, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::min(std::fabs(a[i] - b[i]), 1.0f);
}

void pos_diff_clip(const float* a, const float* b, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(a[i] - b[i], 0.0f, 1.0f);
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

void filter_rows(const double* in, double* out, std::size_t rows, std::size_t cols, const double* taps,
                 std::size_t ntaps) {
    const std::size_t oc = cols - ntaps + 1;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in + r * cols;
        double* dst = out + r * oc;
        for (std::size_t x = 0; x < oc; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < ntaps; ++k) acc += taps[k] * src[x + k];
            dst[x] = acc;
        }
    }
}

void filter_cols(const double* in, double* out, std::size_t rows, std::size_t cols, const double* taps,
                 std::size_t ntaps) {
    const std::size_t orow = rows - ntaps + 1;
    for (std::size_t r = 0; r < orow; ++r) {
        double* dst = out + r * cols;
        for (std::size_t x = 0; x < cols; ++x) dst[x] = 0.0;
        for (std::size_t k = 0; k < ntaps; ++k) {
            const double* src = in + (r + k) * cols;
            for (std::size_t x = 0; x < cols; ++x) dst[x] += taps[k] * src[x];
        }
    }
}

void deform_sample(const DeformGeometry& g, const float* input, const float* offsets, float* columns) {
    deform_sample_reference<float>(g, input, offsets, columns);
}

void deform_sample_backward(const DeformGeometry& g, const float* input, const float* offsets,
                            const float* grad_columns, float* grad_input, float* grad_offsets) {
    deform_sample_backward_reference<float>(g, input, offsets, grad_columns, grad_input, grad_offsets);
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",      haze,        luma,          abs_diff_clip, pos_diff_clip,
        sum_sq_diff,   filter_rows, filter_cols,   deform_sample, deform_sample_backward,
    };
    return table;
}

}  // namespace scanet::simd
