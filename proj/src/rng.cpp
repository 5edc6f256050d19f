#include "mixf/rng.h"

#include <cmath>
#include <limits>

#include "mixf/errors.h"

namespace mixf {

namespace {

// log of a Gamma(shape, 1) variate. Working in log space keeps the
// shape < 1 boost from underflowing to zero for small shapes.
double log_gamma_variate(Rng& rng, double shape) {
    if (shape < 1.0) {
        double boosted = log_gamma_variate(rng, shape + 1.0);
        return boosted + std::log(rng.uniform_open()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = rng.uniform_open();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
}

}  // namespace

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw ValidationError("uniform_index: n must be positive");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - (max % bound + 1) % bound;
    std::uint64_t draw;
    do {
        draw = engine_();
    } while (draw > limit);
    return static_cast<std::size_t>(draw % bound);
}

double Rng::normal() {
    for (;;) {
        double u = 2.0 * uniform() - 1.0;
        double v = 2.0 * uniform() - 1.0;
        double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0)) throw ValidationError("gamma: shape must be positive");
    return std::exp(log_gamma_variate(*this, shape));
}

double Rng::beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta: parameters must be positive");
    double lg1 = log_gamma_variate(*this, a);
    double lg2 = log_gamma_variate(*this, b);
    // g1 / (g1 + g2) == 1 / (1 + exp(lg2 - lg1))
    return 1.0 / (1.0 + std::exp(lg2 - lg1));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace mixf
