#pragma once

// Data-parallel inner loops used by the image pipeline, the metrics and the
// deformable convolution. Each entry has a scalar reference implementation;
// wider variants are selected at runtime when the CPU supports them and are
// tested for equivalence against the reference.

#include <cstddef>
#include <cstdint>

namespace scanet::simd {

// Sampling geometry of a deformable convolution for one image.
// Input is channels-last [in_h, in_w, channels]; columns are
// [locations][taps][channels]; offsets are [locations][taps][2] holding
// (dy, dx) per tap.
struct DeformGeometry {
    int64_t channels = 0;
    int64_t in_h = 0, in_w = 0;
    int64_t out_h = 0, out_w = 0;
    int64_t kernel_h = 3, kernel_w = 3;
    int64_t stride = 1, pad = 1, dilation = 1;

    int64_t taps() const noexcept { return kernel_h * kernel_w; }
    int64_t locations() const noexcept { return out_h * out_w; }
};

struct KernelTable {
    const char* name;

    // out = clamp(clear * t + airlight * (1 - t), 0, 1), elementwise.
    void (*haze)(const float* clear, const float* t, const float* airlight, float* out, std::size_t n);
    // BT.601 luma from three planes.
    void (*luma)(const float* r, const float* g, const float* b, float* y, std::size_t n);
    // out = clamp(|a - b|, 0, 1)
    void (*abs_diff_clip)(const float* a, const float* b, float* out, std::size_t n);
    // out = clamp(a - b, 0, 1)
    void (*pos_diff_clip)(const float* a, const float* b, float* out, std::size_t n);
    // sum((a - b)^2) accumulated in double.
    double (*sum_sq_diff)(const float* a, const float* b, std::size_t n);

    // "Valid" 1-D correlation along rows: out is rows x (cols - ntaps + 1).
    void (*filter_rows)(const double* in, double* out, std::size_t rows, std::size_t cols, const double* taps,
                        std::size_t ntaps);
    // "Valid" 1-D correlation along columns: out is (rows - ntaps + 1) x cols.
    void (*filter_cols)(const double* in, double* out, std::size_t rows, std::size_t cols, const double* taps,
                        std::size_t ntaps);

    // Bilinear sampling of every (location, tap) into the column buffer.
    void (*deform_sample)(const DeformGeometry& g, const float* input, const float* offsets, float* columns);
    // Adjoint of deform_sample. grad_input is accumulated into (caller zeroes
    // it); grad_offsets is overwritten.
    void (*deform_sample_backward)(const DeformGeometry& g, const float* input, const float* offsets,
                                   const float* grad_columns, float* grad_input, float* grad_offsets);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not built or the CPU lacks the instructions.
const KernelTable* avx2_kernels();

// Best table for this CPU. SCANET_SIMD=scalar in the environment forces the
// reference table.
const KernelTable& active_kernels();

}  // namespace scanet::simd
