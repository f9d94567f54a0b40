#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace gbt {

/// One step of splitmix64; used to derive independent stream seeds from a
/// single master seed so episodes in a sweep stay decorrelated.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic random stream. The engine (mt19937_64) is fully specified by
/// the standard and the uniform/gaussian conversions below are explicit, so a
/// given seed yields the same draw sequence on every platform. All randomness
/// in the library flows through instances of this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// One Box-Muller pair of independent N(0,1) draws. Consumes exactly two
    /// 64-bit words from the engine.
    std::pair<double, double> gaussian_pair() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    /// Single N(0,1) draw. No spare caching: the stream position depends only
    /// on the number of calls made.
    double gaussian() { return gaussian_pair().first; }

    /// Child stream for episode `index` of a run seeded with `master_seed`.
    static Rng for_episode(std::uint64_t master_seed, std::uint64_t index) {
        std::uint64_t s = master_seed;
        std::uint64_t mixed = splitmix64(s) ^ (0x632be59bd9b4e019ull * (index + 1));
        return Rng(splitmix64(mixed));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace gbt
