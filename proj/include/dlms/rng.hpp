#pragma once

#include <cstdint>
#include <random>

namespace dlms {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: distinct (index, stream) pairs give
/// decorrelated generators without any shared state.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t stream = 0) noexcept {
    return mix64(mix64(master ^ mix64(index)) + 0x632be59bd9b4e019ULL * (stream + 1));
}

/// Named streams inside one Monte Carlo run.
enum class Stream : std::uint64_t { failures = 1, regressors = 2, noise = 3 };

inline Rng make_rng(std::uint64_t master, std::uint64_t index, Stream s) {
    return Rng(derive_seed(master, index, static_cast<std::uint64_t>(s)));
}

}  // namespace dlms
