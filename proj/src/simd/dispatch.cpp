#include <cstdlib>
#include <cstring>

#include "scanet/simd/kernels.hpp"

namespace scanet::simd {

#if defined(SCANET_HAVE_AVX2)
const KernelTable& avx2_kernel_table();  // kernels_avx2.cpp
#endif

const KernelTable* avx2_kernels() {
#if defined(SCANET_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable* chosen = [] {
        const char* force = std::getenv("SCANET_SIMD");
        if (force != nullptr && std::strcmp(force, "scalar") == 0) return &scalar_kernels();
        if (const KernelTable* t = avx2_kernels()) return t;
        return &scalar_kernels();
    }();
    return *chosen;
}

}  // namespace scanet::simd
