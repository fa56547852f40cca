#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/math/special_functions/erf.hpp>

namespace gex {

// splitmix64 finaliser; used to derive statistically independent sub-seeds
// so that concurrent tasks are reproducible independent of scheduling.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG wrapper. All variate transforms are implemented here
// rather than via std:: distributions, whose output is implementation
// defined; two runs with the same seed produce identical streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix_seed(seed)), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Sub-generator for task `index`; independent of draws taken so far.
    Rng split(std::uint64_t index) const {
        return Rng(mix_seed(seed_ ^ mix_seed(index + 1)));
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0, 1).
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // rejection to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    double exponential() { return -std::log1p(-uniform()); }

    // Standard normal via inverse CDF.
    double normal() {
        const double u = uniform_open();
        return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
    }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_;
};

}  // namespace gex
