// Compiled with -mavx2 -mfma; only reached through avx2_kernels() after a
// CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "scanet/simd/deform_reference.hpp"
#include "scanet/simd/kernels.hpp"

namespace scanet::simd {
namespace {

inline float hsum(__m256 v) {
    const __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
    return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void haze(const float* clear, const float* t, const float* airlight, float* out, std::size_t n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 tv = _mm256_loadu_ps(t + i);
        const __m256 air = _mm256_mul_ps(_mm256_loadu_ps(airlight + i), _mm256_sub_ps(one, tv));
        __m256 v = _mm256_fmadd_ps(_mm256_loadu_ps(clear + i), tv, air);
        v = _mm256_min_ps(_mm256_max_ps(v, zero), one);
        _mm256_storeu_ps(out + i, v);
    }
    for (; i < n; ++i) out[i] = std::clamp(clear[i] * t[i] + airlight[i] * (1.0f - t[i]), 0.0f, 1.0f);
}

void luma(const float* r, const float* g, const float* b, float* y, std::size_t n) {
    const __m256 kr = _mm256_set1_ps(0.299f), kg = _mm256_set1_ps(0.587f), kb = _mm256_set1_ps(0.114f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_mul_ps(kr, _mm256_loadu_ps(r + i));
        v = _mm256_fmadd_ps(kg, _mm256_loadu_ps(g + i), v);
        v = _mm256_fmadd_ps(kb, _mm256_loadu_ps(b + i), v);
        _mm256_storeu_ps(y + i, v);
    }
    for (; i < n; ++i) y[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
}

void abs_diff_clip(const float* a, const float* b, float* out, std::size_t n) {
    const __m256 sign = _mm256_set1_ps(-0.0f);
    const __m256 one = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_andnot_ps(sign, d), one));
    }
    for (; i < n; ++i) out[i] = std::min(std::fabs(a[i] - b[i]), 1.0f);
}

void pos_diff_clip(const float* a, const float* b, float* out, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(d, zero), one));
    }
    for (; i < n; ++i) out[i] = std::clamp(a[i] - b[i], 0.0f, 1.0f);
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + i)), _mm256_cvtps_pd(_mm_loadu_ps(b + i)));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

void filter_rows(const double* in, double* out, std::size_t rows, std::size_t cols, const double* taps,
                 std::size_t ntaps) {
    const std::size_t oc = cols - ntaps + 1;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in + r * cols;
        double* dst = out + r * oc;
        std::size_t x = 0;
        for (; x + 4 <= oc; x += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < ntaps; ++k)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(src + x + k), acc);
            _mm256_storeu_pd(dst + x, acc);
        }
        for (; x < oc; ++x) {
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
        std::size_t x = 0;
        for (; x + 4 <= cols; x += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < ntaps; ++k)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(in + (r + k) * cols + x), acc);
            _mm256_storeu_pd(dst + x, acc);
        }
        for (; x < cols; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < ntaps; ++k) acc += taps[k] * in[(r + k) * cols + x];
            dst[x] = acc;
        }
    }
}

void deform_sample(const DeformGeometry& g, const float* input, const float* offsets, float* columns) {
    const int64_t C = g.channels, K = g.taps(), L = g.locations();
    for (int64_t l = 0; l < L; ++l) {
        for (int64_t k = 0; k < K; ++k) {
            float py, px;
            sample_position(g, l, k, offsets, py, px);
            const auto b = bilinear_tap(py, px, g.in_h, g.in_w);
            const float w[4] = {(1 - b.ly) * (1 - b.lx), (1 - b.ly) * b.lx, b.ly * (1 - b.lx), b.ly * b.lx};
            const int64_t ys[4] = {b.y0, b.y0, b.y0 + 1, b.y0 + 1};
            const int64_t xs[4] = {b.x0, b.x0 + 1, b.x0, b.x0 + 1};
            const float* src[4];
            int nvalid = 0;
            float wv[4];
            for (int q = 0; q < 4; ++q) {
                if (!b.valid[q]) continue;
                src[nvalid] = input + (ys[q] * g.in_w + xs[q]) * C;
                wv[nvalid++] = w[q];
            }
            float* dst = columns + (l * K + k) * C;
            int64_t c = 0;
            for (; c + 8 <= C; c += 8) {
                __m256 acc = _mm256_setzero_ps();
                for (int q = 0; q < nvalid; ++q)
                    acc = _mm256_fmadd_ps(_mm256_set1_ps(wv[q]), _mm256_loadu_ps(src[q] + c), acc);
                _mm256_storeu_ps(dst + c, acc);
            }
            for (; c < C; ++c) {
                float acc = 0.0f;
                for (int q = 0; q < nvalid; ++q) acc += wv[q] * src[q][c];
                dst[c] = acc;
            }
        }
    }
}

void deform_sample_backward(const DeformGeometry& g, const float* input, const float* offsets,
                            const float* grad_columns, float* grad_input, float* grad_offsets) {
    const int64_t C = g.channels, K = g.taps(), L = g.locations();
    for (int64_t l = 0; l < L; ++l) {
        for (int64_t k = 0; k < K; ++k) {
            float py, px;
            sample_position(g, l, k, offsets, py, px);
            const auto b = bilinear_tap(py, px, g.in_h, g.in_w);
            const float hy = 1 - b.ly, hx = 1 - b.lx;
            const float w[4] = {hy * hx, hy * b.lx, b.ly * hx, b.ly * b.lx};
            const float wy[4] = {-hx, -b.lx, hx, b.lx};
            const float wx[4] = {-hy, hy, -b.ly, b.ly};
            const int64_t ys[4] = {b.y0, b.y0, b.y0 + 1, b.y0 + 1};
            const int64_t xs[4] = {b.x0, b.x0 + 1, b.x0, b.x0 + 1};
            const float* gc = grad_columns + (l * K + k) * C;
            float gy = 0.0f, gx = 0.0f;
            for (int q = 0; q < 4; ++q) {
                if (!b.valid[q]) continue;
                const int64_t base = (ys[q] * g.in_w + xs[q]) * C;
                const float* src = input + base;
                float* gin = grad_input + base;
                const __m256 wq = _mm256_set1_ps(w[q]);
                __m256 dotv = _mm256_setzero_ps();
                int64_t c = 0;
                for (; c + 8 <= C; c += 8) {
                    const __m256 gcv = _mm256_loadu_ps(gc + c);
                    _mm256_storeu_ps(gin + c, _mm256_fmadd_ps(wq, gcv, _mm256_loadu_ps(gin + c)));
                    dotv = _mm256_fmadd_ps(gcv, _mm256_loadu_ps(src + c), dotv);
                }
                float dot = hsum(dotv);
                for (; c < C; ++c) {
                    gin[c] += w[q] * gc[c];
                    dot += gc[c] * src[c];
                }
                gy += wy[q] * dot;
                gx += wx[q] * dot;
            }
            float* go = grad_offsets + (l * K + k) * 2;
            go[0] = gy;
            go[1] = gx;
        }
    }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{
        "avx2",        haze,        luma,          abs_diff_clip, pos_diff_clip,
        sum_sq_diff,   filter_rows, filter_cols,   deform_sample, deform_sample_backward,
    };
    return table;
}

}  // namespace scanet::simd
