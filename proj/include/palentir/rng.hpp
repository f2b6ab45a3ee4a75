#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace palentir {

/// Seeded 64-bit Mersenne Twister (std::mt19937_64, whose output sequence is fixed by
/// the standard). Uniform and normal draws are derived here rather than through
/// <random> distributions so a seed yields the same stream on every toolchain:
///   uniform01 = (x >> 11) * 2^-53
///   normal    = Box-Muller on two uniforms, one value per call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson draw; small means use Knuth's product method, large means std's.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        std::poisson_distribution<std::uint64_t> dist(mean);
        return dist(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace palentir
