#include "scanet/runtime.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

#include <torch/torch.h>

namespace scanet {

bool deterministic_mode() {
    const char* v = std::getenv("SCANET_DETERMINISTIC");
    return v != nullptr && std::strcmp(v, "1") == 0;
}

void configure_runtime() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (deterministic_mode()) {
            torch::set_num_threads(1);
            at::globalContext().setDeterministicAlgorithms(true, false);
        }
    });
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace scanet
