#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace abmflow::detail {

/// splitmix64: tiny, portable, fully deterministic stream. Seeds and draws
/// are value-stable across platforms, which keeps seeded reports diffable.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    double uniform() {  // in [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double normal() {  // Box-Muller, one draw per call
        double u = uniform();
        while (u <= 0.0) u = uniform();
        const double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) *
               std::cos(2.0 * std::numbers::pi * v);
    }
};

}  // namespace abmflow::detail
