#pragma once

// Scalar bilinear sampling for deformable convolution, generic over the
// floating type. The float instantiation backs the scalar kernel table; the
// double instantiation is used for gradient checking.

#include <cmath>
#include <cstdint>

#include "scanet/simd/kernels.hpp"

namespace scanet::simd {

template <class T>
struct BilinearTap {
    int64_t y0, x0;
    T ly, lx;      // fractional parts
    bool valid[4]; // (y0,x0) (y0,x1) (y1,x0) (y1,x1)
};

template <class T>
inline BilinearTap<T> bilinear_tap(T py, T px, int64_t h, int64_t w) {
    BilinearTap<T> b;
    const T fy = std::floor(py);
    const T fx = std::floor(px);
    b.y0 = static_cast<int64_t>(fy);
    b.x0 = static_cast<int64_t>(fx);
    b.ly = py - fy;
    b.lx = px - fx;
    const bool y0in = b.y0 >= 0 && b.y0 < h;
    const bool y1in = b.y0 + 1 >= 0 && b.y0 + 1 < h;
    const bool x0in = b.x0 >= 0 && b.x0 < w;
    const bool x1in = b.x0 + 1 >= 0 && b.x0 + 1 < w;
    b.valid[0] = y0in && x0in;
    b.valid[1] = y0in && x1in;
    b.valid[2] = y1in && x0in;
    b.valid[3] = y1in && x1in;
    return b;
}

template <class T>
inline void sample_position(const DeformGeometry& g, int64_t l, int64_t k, const T* offsets, T& py, T& px) {
    const int64_t oy = l / g.out_w, ox = l % g.out_w;
    const int64_t ki = k / g.kernel_w, kj = k % g.kernel_w;
    const T* off = offsets + (l * g.taps() + k) * 2;
    py = static_cast<T>(oy * g.stride - g.pad + ki * g.dilation) + off[0];
    px = static_cast<T>(ox * g.stride - g.pad + kj * g.dilation) + off[1];
}

template <class T>
void deform_sample_reference(const DeformGeometry& g, const T* input, const T* offsets, T* columns) {
    const int64_t C = g.channels, K = g.taps(), L = g.locations();
    for (int64_t l = 0; l < L; ++l) {
        for (int64_t k = 0; k < K; ++k) {
            T py, px;
            sample_position(g, l, k, offsets, py, px);
            const auto b = bilinear_tap(py, px, g.in_h, g.in_w);
            const T w[4] = {(1 - b.ly) * (1 - b.lx), (1 - b.ly) * b.lx, b.ly * (1 - b.lx), b.ly * b.lx};
            const int64_t ys[4] = {b.y0, b.y0, b.y0 + 1, b.y0 + 1};
            const int64_t xs[4] = {b.x0, b.x0 + 1, b.x0, b.x0 + 1};
            T* dst = columns + (l * K + k) * C;
            for (int64_t c = 0; c < C; ++c) dst[c] = 0;
            for (int q = 0; q < 4; ++q) {
                if (!b.valid[q]) continue;
                const T* src = input + (ys[q] * g.in_w + xs[q]) * C;
                for (int64_t c = 0; c < C; ++c) dst[c] += w[q] * src[c];
            }
        }
    }
}

template <class T>
void deform_sample_backward_reference(const DeformGeometry& g, const T* input, const T* offsets,
                                      const T* grad_columns, T* grad_input, T* grad_offsets) {
    const int64_t C = g.channels, K = g.taps(), L = g.locations();
    for (int64_t l = 0; l < L; ++l) {
        for (int64_t k = 0; k < K; ++k) {
            T py, px;
            sample_position(g, l, k, offsets, py, px);
            const auto b = bilinear_tap(py, px, g.in_h, g.in_w);
            const T hy = 1 - b.ly, hx = 1 - b.lx;
            const T w[4] = {hy * hx, hy * b.lx, b.ly * hx, b.ly * b.lx};
            // d(weight)/dy and d(weight)/dx per corner
            const T wy[4] = {-hx, -b.lx, hx, b.lx};
            const T wx[4] = {-hy, hy, -b.ly, b.ly};
            const int64_t ys[4] = {b.y0, b.y0, b.y0 + 1, b.y0 + 1};
            const int64_t xs[4] = {b.x0, b.x0 + 1, b.x0, b.x0 + 1};
            const T* gc = grad_columns + (l * K + k) * C;
            T gy = 0, gx = 0;
            for (int q = 0; q < 4; ++q) {
                if (!b.valid[q]) continue;
                const int64_t base = (ys[q] * g.in_w + xs[q]) * C;
                const T* src = input + base;
                T* gin = grad_input + base;
                T dot = 0;
                for (int64_t c = 0; c < C; ++c) {
                    gin[c] += w[q] * gc[c];
                    dot += gc[c] * src[c];
                }
                gy += wy[q] * dot;
                gx += wx[q] * dot;
            }
            T* go = grad_offsets + (l * K + k) * 2;
            go[0] = gy;
            go[1] = gx;
        }
    }
}

}  // namespace scanet::simd
