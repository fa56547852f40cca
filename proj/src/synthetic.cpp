#include "gex/synthetic.hpp"

#include <cmath>

#include "gex/rng.hpp"
#include "gex/special.hpp"

namespace gex {

namespace {

// Square grid when d is a perfect square, otherwise a unit-spaced line.
std::vector<Eigen::Vector2d> synthetic_coordinates(int d) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
    if (side * side == d) return grid_coordinates(side);
    std::vector<Eigen::Vector2d> coords;
    for (int k = 1; k <= d; ++k) coords.emplace_back(1.0, static_cast<double>(k));
    return coords;
}

Eigen::MatrixXd meta_gaussian(const SyntheticSpec& spec, const Eigen::MatrixXd& dist, Rng& rng) {
    const Eigen::MatrixXd sigma = powexp_correlation(dist, spec.phi, spec.kappa);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw numerical_error("synthetic: correlation matrix not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    Eigen::MatrixXd out(spec.n, spec.d);
    Eigen::VectorXd x(spec.d);
    for (long t = 0; t < spec.n; ++t) {
        for (int j = 0; j < spec.d; ++j) x[j] = rng.normal();
        const Eigen::VectorXd y = chol * x;
        // exponential margin: -log(1 - Phi(y)) = -log(Phi(-y))
        for (int j = 0; j < spec.d; ++j) out(t, j) = -std::log(norm_cdf(-y[j]));
    }
    return out;
}

Eigen::MatrixXd known_gauge_rejection(const SyntheticSpec& spec, const Eigen::MatrixXd& dist,
                                      Rng& rng) {
    if (spec.d > 6) throw validation_error("synthetic: KnownGaugeRejection supports d <= 6");
    if (!(spec.r_lo > 0.0 && spec.r_hi > spec.r_lo))
        throw validation_error("synthetic: invalid radial window");
    const CorrelationModel corr(dist, spec.phi, spec.kappa);

    // Certified lower bound of g on the window: g(z) >= r_lo * lambda_max(Sigma)^{-gamma/2}
    // * min_simplex(sum w^{2/gamma})^{gamma/2}.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr.sigma());
    const double lam_max = es.eigenvalues().maxCoeff();
    const double p = 2.0 / spec.gamma;
    const double simplex_min = (p >= 1.0) ? std::pow(static_cast<double>(spec.d), 1.0 - p) : 1.0;
    const double g_floor =
        spec.r_lo * std::pow(lam_max, -spec.gamma / 2.0) * std::pow(simplex_min, spec.gamma / 2.0);

    Eigen::MatrixXd out(spec.n, spec.d);
    Eigen::VectorXd z(spec.d);
    long accepted = 0;
    long attempts = 0;
    const long max_attempts = 20000L * spec.n + 1000000L;
    while (accepted < spec.n) {
        if (++attempts > max_attempts)
            throw sampling_error(
                "KnownGaugeRejection: acceptance rate below 1e-4; choose a smaller radial window");
        for (int j = 0; j < spec.d; ++j) z[j] = rng.uniform() * spec.r_hi;
        const double r = z.sum();
        if (r < spec.r_lo || r > spec.r_hi) continue;
        const double g = gauge(z, corr, spec.gamma);
        if (rng.uniform() < std::exp(-(g - g_floor))) out.row(accepted++) = z;
    }
    return out;
}

}  // namespace

GridDataset generate(const SyntheticSpec& spec) {
    if (spec.d < 1 || spec.n < 1) throw validation_error("synthetic: d and n must be positive");
    GridDataset ds;
    ds.run_id = 0;
    ds.sites = synthetic_coordinates(spec.d);
    ds.times.resize(spec.n);
    for (long t = 0; t < spec.n; ++t) ds.times[t] = t + 1;

    Rng rng(spec.seed);
    switch (spec.kind) {
        case SyntheticKind::MetaGaussian:
            ds.values = meta_gaussian(spec, pairwise_distances(ds.sites), rng);
            break;
        case SyntheticKind::IndependentExp: {
            ds.values.resize(spec.n, spec.d);
            for (long t = 0; t < spec.n; ++t)
                for (int j = 0; j < spec.d; ++j) ds.values(t, j) = rng.exponential();
            break;
        }
        case SyntheticKind::Comonotone: {
            ds.values.resize(spec.n, spec.d);
            for (long t = 0; t < spec.n; ++t) {
                const double e = rng.exponential();
                for (int j = 0; j < spec.d; ++j) ds.values(t, j) = e;
            }
            break;
        }
        case SyntheticKind::KnownGaugeRejection:
            ds.values = known_gauge_rejection(spec, pairwise_distances(ds.sites), rng);
            break;
    }
    return ds;
}

}  // namespace gex
