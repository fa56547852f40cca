#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/gamma.hpp>

#include "gex/fit.hpp"
#include "gex/rng.hpp"
#include "gex/special.hpp"
#include "gex/synthetic.hpp"

using namespace gex;

namespace {

Eigen::MatrixXd zero_distance(int d) {
    return Eigen::MatrixXd::Zero(d, d);
}

Eigen::MatrixXd far_distances(int d) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(d, d, 1e6);
    h.diagonal().setZero();
    return h;
}

}  // namespace

TEST_CASE("truncated gamma log-likelihood hand evaluation") {
    // d = 1, lambda = 1, g = 1, r = 2, r_tau = 1:
    // loglik = -r - log survival(1) = -2 + 1 = -1
    const CorrelationModel corr(zero_distance(1), 1.0, 1.0);
    ExceedanceSet exc;
    exc.d = 1;
    exc.n_total = 1;
    AngularPoint p;
    p.r = 2.0;
    p.w = Eigen::VectorXd::Ones(1);
    exc.points.push_back(p);
    exc.thresholds.push_back(1.0);
    CHECK(tg_loglik(1.0, 2.0, corr, exc) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("zero thresholds reduce to the plain gamma log-density") {
    Rng rng(5);
    const int d = 4;
    const CorrelationModel corr(far_distances(d), 1.0, 1.0);
    ExceedanceSet exc;
    exc.d = d;
    exc.n_total = 100;
    double lambda = 0.7, gamma = 1.4;
    const double a = lambda * d;
    double oracle = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) z[j] = rng.exponential() + 1e-3;
        AngularPoint p = radial_angular(z);
        const double g = gauge(p.w, corr, gamma);
        // independent density oracle: gamma(shape a, rate g) pdf at r
        boost::math::gamma_distribution<double> dist(a, 1.0 / g);
        oracle += std::log(boost::math::pdf(dist, p.r));
        exc.points.push_back(std::move(p));
        exc.thresholds.push_back(0.0);
    }
    CHECK(tg_loglik(lambda, gamma, corr, exc) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("log-likelihood is exactly permutation invariant") {
    Rng rng(7);
    const int d = 3;
    const CorrelationModel corr(far_distances(d), 1.0, 1.0);
    ExceedanceSet exc;
    exc.d = d;
    exc.n_total = 500;
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) z[j] = rng.exponential() + 1e-3;
        AngularPoint p = radial_angular(z);
        exc.points.push_back(p);
        exc.thresholds.push_back(0.5 * p.r);
    }
    const double base = tg_loglik(0.9, 1.7, corr, exc);
    ExceedanceSet rev = exc;
    std::reverse(rev.points.begin(), rev.points.end());
    std::reverse(rev.thresholds.begin(), rev.thresholds.end());
    CHECK(tg_loglik(0.9, 1.7, corr, rev) == base);  // bitwise identical
}

TEST_CASE("points at or below their threshold trigger the sentinel") {
    const CorrelationModel corr(zero_distance(1), 1.0, 1.0);
    ExceedanceSet exc;
    exc.d = 1;
    exc.n_total = 1;
    AngularPoint p;
    p.r = 1.0;
    p.w = Eigen::VectorXd::Ones(1);
    exc.points.push_back(p);
    exc.thresholds.push_back(1.0);  // not strictly above
    CHECK(tg_loglik(1.0, 2.0, corr, exc) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("exceedance set respects the target fraction") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 9;
    spec.n = 10000;
    spec.seed = 31;
    const GridDataset ds = generate(spec);
    FitOptions opts;
    const PairwiseFit pw = fit_pairwise(ds.values, ds.sites, 0.8, opts);
    const GaugeParams params(1.0, pw.phi, pw.kappa, 2.0, pw.c_tau, 0.8, ds.sites);
    const ExceedanceSet exc = make_exceedance_set(ds.values, params);
    const double frac = exc.points.size() / static_cast<double>(exc.n_total);
    CHECK(std::fabs(frac - 0.2) < 0.02);
    for (std::size_t i = 0; i < exc.points.size(); ++i)
        CHECK(exc.points[i].r > exc.thresholds[i]);
}

TEST_CASE("pairwise stage recovers correlation parameters") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 9;
    spec.n = 20000;
    spec.phi = 1.0;
    spec.kappa = 1.5;
    spec.seed = 17;
    const GridDataset ds = generate(spec);
    const PairwiseFit pw = fit_pairwise(ds.values, ds.sites, 0.8);
    CHECK(pw.phi > 0.7);
    CHECK(pw.phi < 1.3);
    CHECK(std::fabs(pw.kappa - 1.5) < 0.3);
    CHECK(pw.c_tau > 0.0);
}

TEST_CASE("pairwise stage preconditions") {
    Eigen::MatrixXd one_col(100, 1);
    one_col.setOnes();
    CHECK_THROWS_AS(fit_pairwise(one_col, {Eigen::Vector2d(0, 0)}, 0.8), validation_error);
}

TEST_CASE("full fit recovers gaussian dependence on synthetic data") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 4;
    spec.n = 20000;
    spec.phi = 1.0;
    spec.kappa = 1.5;
    spec.seed = 23;
    const GridDataset ds = generate(spec);
    FitOptions opts;
    opts.seed = 23;
    const PairwiseFit pw = fit_pairwise(ds.values, ds.sites, 0.8, opts);
    const GaugeParams params1(1.0, pw.phi, pw.kappa, 2.0, pw.c_tau, 0.8, ds.sites);
    const ExceedanceSet exc = make_exceedance_set(ds.values, params1);
    const FittedGeometricModel fit = fit_truncated_gamma(exc, ds.sites, pw, 0.8, opts);

    CHECK(fit.params.gamma() > 1.5);
    CHECK(fit.params.gamma() < 2.5);
    CHECK(std::isfinite(fit.loglik));

    // optimizer contract: attained loglik at least the init loglik
    const GaugeParams init_params(1.0, pw.phi, pw.kappa, 2.0, pw.c_tau, 0.8, ds.sites);
    CHECK(fit.loglik >= tg_loglik(init_params, exc) - 1e-9);

    // determinism: refit with the same options is identical
    const FittedGeometricModel again = fit_truncated_gamma(exc, ds.sites, pw, 0.8, opts);
    CHECK(again.params.lambda() == fit.params.lambda());
    CHECK(again.params.gamma() == fit.params.gamma());

    // permuted exceedance list refit agrees to 1e-8
    ExceedanceSet rev = exc;
    std::reverse(rev.points.begin(), rev.points.end());
    std::reverse(rev.thresholds.begin(), rev.thresholds.end());
    const FittedGeometricModel perm = fit_truncated_gamma(rev, ds.sites, pw, 0.8, opts);
    CHECK(perm.params.lambda() == doctest::Approx(fit.params.lambda()).epsilon(1e-8));
    CHECK(perm.params.phi() == doctest::Approx(fit.params.phi()).epsilon(1e-8));
    CHECK(perm.params.kappa() == doctest::Approx(fit.params.kappa()).epsilon(1e-8));
    CHECK(perm.params.gamma() == doctest::Approx(fit.params.gamma()).epsilon(1e-8));

    // finalize: recalibrated thresholds restore the exceedance fraction
    const auto [final_model, exc2] = finalize_model(ds.values, fit);
    const double frac = exc2.points.size() / static_cast<double>(exc2.n_total);
    CHECK(std::fabs(frac - 0.2) <= 1.0 / static_cast<double>(exc2.n_total) + 1e-12);
}

TEST_CASE("too few exceedances for the full fit") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 4;
    spec.n = 150;
    spec.seed = 29;
    const GridDataset ds = generate(spec);
    const PairwiseFit pw = fit_pairwise(ds.values, ds.sites, 0.9);
    const GaugeParams params1(1.0, pw.phi, pw.kappa, 2.0, pw.c_tau, 0.9, ds.sites);
    const ExceedanceSet exc = make_exceedance_set(ds.values, params1);
    REQUIRE(exc.points.size() < 40);
    CHECK_THROWS_AS(fit_truncated_gamma(exc, ds.sites, pw, 0.9), validation_error);
}
