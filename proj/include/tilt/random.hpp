#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tilt {

// Seeded generator with hand-rolled transforms. std::*_distribution output is
// implementation-defined, so the transforms live here: a fixed seed yields the
// same stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without the cached spare; two uniforms per draw.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 == 0.0);
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Exponential(rate), mean 1/rate.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the draw exactly uniform.
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tilt
