#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace rpmnet {

/// xoshiro256** seeded through splitmix64.
///
/// The distributions below are written out by hand rather than taken from
/// <random>: the standard leaves normal_distribution, uniform_int_distribution
/// and std::shuffle implementation-defined, and training runs must reproduce
/// bit-for-bit across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via Box-Muller; uses two uniforms per call.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace rpmnet
