#pragma once

#include <cstdint>

namespace scanet {

// True when SCANET_DETERMINISTIC=1 is set.
bool deterministic_mode();

// Applies the thread/determinism policy to the tensor backend. Idempotent.
void configure_runtime();

// SplitMix64 step; used to derive independent per-item seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace scanet
