#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mbsat {

/// Seeded generator with platform-stable distributions.
///
/// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
/// adaptors are not, so the conversions to real and integer ranges live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t index(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stable hash of a seed path, e.g. derive_seed(master, {iteration, stream, beam}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Independent random streams of one Monte Carlo drop.
enum class Stream : std::uint64_t {
    Deploy = 0x6465706c,
    Phase = 0x70686173,
    Cluster = 0x636c7573,
    Schedule = 0x73636864,
};

inline std::uint64_t derive_seed(std::uint64_t iteration_seed, Stream stream, std::uint64_t index = 0) {
    return derive_seed(iteration_seed, {static_cast<std::uint64_t>(stream), index});
}

} // namespace mbsat
