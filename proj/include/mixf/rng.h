#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace mixf {

/// Seeded random stream used for every stochastic choice in the library.
///
/// Only the raw 64-bit engine output of std::mt19937_64 is used (its
/// sequence is fixed by the standard); all derived distributions are
/// implemented here so results do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform on (0, 1); never returns 0.
    double uniform_open();
    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);
    /// Standard normal (Marsaglia polar method, no cached second value).
    double normal();
    /// Gamma(shape, 1) via Marsaglia-Tsang; shapes below 1 use the
    /// g(shape+1) * U^(1/shape) boost.
    double gamma(double shape);
    /// Beta(a, b) as g1 / (g1 + g2).
    double beta(double a, double b);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mixf
