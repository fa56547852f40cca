#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "gex/geometry.hpp"
#include "gex/ingest.hpp"

namespace gex {

enum class SyntheticKind { MetaGaussian, IndependentExp, Comonotone, KnownGaugeRejection };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::MetaGaussian;
    int d = 9;          // must be a perfect square for grid coordinates
    long n = 10000;
    double phi = 1.0;   // powered-exponential range (MetaGaussian / KnownGaugeRejection)
    double kappa = 1.5;
    double gamma = 2.0;     // KnownGaugeRejection only
    double r_lo = 1.0;      // KnownGaugeRejection radial window
    double r_hi = 10.0;
    std::uint64_t seed = 1;
};

// Exponential-margin synthetic data on the square grid implied by d.
// MetaGaussian: Gaussian copula with powered-exponential correlation.
// IndependentExp: i.i.d. unit exponentials.
// Comonotone: one exponential column replicated.
// KnownGaugeRejection: density proportional to exp(-g(z)) on a compact
// radial window, for radial-model oracles at small d.
GridDataset generate(const SyntheticSpec& spec);

}  // namespace gex
