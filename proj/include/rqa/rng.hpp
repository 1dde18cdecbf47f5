#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rqa {

/// 64-bit engine used by every seeded stage.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit hash of a byte string (FNV-1a followed by a splitmix finalizer).
std::uint64_t stable_hash(std::string_view bytes);

/// Derives an independent substream seed from a master seed.
///
/// The stage tag separates pipeline stages (sampling, few-shot selection,
/// mock generation, bootstrap, DE, folds); the index separates replicates
/// or items within a stage. The mapping is a pure function, so any stage
/// can be rerun alone and reproduce its draws.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view stage,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, stage, index));
}

/// Uniform integer in [0, bound) without relying on std distributions,
/// whose output differs between standard library implementations.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

/// Uniform double in [0, 1) built from the top 53 bits.
double uniform01(Rng& rng);

/// Standard normal deviate (Box-Muller, one value per call).
double standard_normal(Rng& rng);

}  // namespace rqa
