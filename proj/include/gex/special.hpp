#pragma once

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "gex/errors.hpp"

namespace gex {

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Regularised gamma survival Q(a, x) = P(G > x) for G ~ Gamma(shape a, rate 1).
inline double gamma_sf(double a, double x) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(a, x);
}

inline double gamma_cdf(double a, double x) {
    if (x <= 0.0) return 0.0;
    return boost::math::gamma_p(a, x);
}

// log Q(a, x), stable far into the tail where Q underflows.
inline double log_gamma_sf(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) {
        // survival is not small here; direct evaluation is accurate
        return std::log(boost::math::gamma_q(a, x));
    }
    const double q = boost::math::gamma_q(a, x);
    if (q > 1e-280) return std::log(q);
    // Continued fraction for the upper incomplete gamma (modified Lentz),
    // carried in log space: Q(a,x) = exp(-x + a log x - lgamma(a)) * h.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return -x + a * std::log(x) - std::lgamma(a) + std::log(h);
}

// Inverse survival: x with Q(a, x) = q.
inline double gamma_sf_inv(double a, double q) {
    return boost::math::gamma_q_inv(a, q);
}

// p-quantile of Gamma(shape a, rate 1).
inline double gamma_quantile(double a, double p) {
    if (!(a > 0.0)) throw validation_error("gamma_quantile: shape must be positive");
    if (!(p > 0.0 && p < 1.0)) throw validation_error("gamma_quantile: p must lie in (0,1)");
    return boost::math::gamma_p_inv(a, p);
}

}  // namespace gex
