#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace msda {

// std::mt19937_64 output is pinned by the standard; the distribution
// adaptors are not. These helpers map raw draws to values ourselves so
// seeded runs reproduce bit-for-bit on any platform.

/// Uniform double in [0,1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection sampling; bound >= 1.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t draw;
    do {
        draw = gen();
    } while (draw >= limit);
    return draw % bound;
}

/// Seeded Fisher-Yates shuffle.
template <class T>
void shuffle(std::vector<T>& values, std::mt19937_64& gen) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
        std::swap(values[i - 1], values[j]);
    }
}

/// Uniformly random permutation of {0, ..., n-1}.
inline std::vector<std::uint32_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937_64 gen(seed);
    shuffle(perm, gen);
    return perm;
}

} // namespace msda
