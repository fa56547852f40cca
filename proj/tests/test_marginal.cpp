#include <doctest.h>

#include <cmath>

#include "gex/marginal.hpp"
#include "gex/rng.hpp"
#include "gex/synthetic.hpp"

using namespace gex;

namespace {

GridDataset tiny_dataset(int n, int d, std::uint64_t seed) {
    GridDataset ds;
    ds.run_id = 1;
    for (int j = 0; j < d; ++j) ds.sites.emplace_back(1.0, j + 1.0);
    ds.times.resize(n);
    Rng rng(seed);
    ds.values.resize(n, d);
    for (int t = 0; t < n; ++t) {
        ds.times[t] = t + 1;
        for (int j = 0; j < d; ++j) ds.values(t, j) = rng.exponential();
    }
    return ds;
}

}  // namespace

TEST_CASE("covariate layout and lag exclusion") {
    GridDataset ds = tiny_dataset(10, 2, 1);
    ds.values.col(0).setConstant(2.5);
    const CovariateMatrix cov = build_covariates(ds, 0);
    CHECK(cov.X.rows() == 7);  // first 3 days dropped
    CHECK(cov.X.cols() == 2 + 2 * 2 + 3);
    CHECK(cov.first_row == 3);
    // constant series: all lag entries equal
    for (long i = 0; i < cov.X.rows(); ++i)
        for (int c = 6; c < 9; ++c) CHECK(cov.X(i, c) == 2.5);
    // intercept column
    CHECK(cov.X.col(0).minCoeff() == 1.0);
    CHECK(cov.X.col(0).maxCoeff() == 1.0);
}

TEST_CASE("harmonic columns carry the annual cycle at day 366") {
    GridDataset ds = tiny_dataset(4, 1, 2);
    ds.times = {363, 364, 365, 366};
    CovariateConfig cfg;
    cfg.harmonics = 1;
    const CovariateMatrix cov = build_covariates(ds, 0, cfg);
    REQUIRE(cov.X.rows() == 1);
    const double angle = 2.0 * M_PI * 366.0 / 365.25;
    CHECK(cov.X(0, 2) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
    CHECK(cov.X(0, 3) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
}

TEST_CASE("series shorter than the lag window is rejected") {
    GridDataset ds = tiny_dataset(3, 1, 3);
    CHECK_THROWS_AS(build_covariates(ds, 0), validation_error);
}

TEST_CASE("gaussian white noise recovers unit location scale") {
    Rng rng(11);
    const int n = 5000;
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y[t] = rng.normal();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    const LocationScaleFit fit = fit_location_scale(y, X);
    CHECK(fit.converged);
    CHECK(std::fabs(fit.mu_coeffs[0]) < 3.0 / std::sqrt(static_cast<double>(n)));
    // se of log sigma is 1/sqrt(2n)
    CHECK(std::fabs(fit.log_sigma_coeffs[0]) < 3.0 / std::sqrt(2.0 * n));
}

TEST_CASE("cosine location signal is recovered") {
    Rng rng(13);
    const int n = 5000;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        const double c = std::cos(2.0 * M_PI * t / 365.25);
        X(t, 0) = 1.0;
        X(t, 1) = c;
        y[t] = 2.0 + 0.5 * c + rng.normal();
    }
    const LocationScaleFit fit = fit_location_scale(y, X);
    const double se = std::sqrt(2.0 / n);  // 1/sqrt(n * E[cos^2])
    CHECK(std::fabs(fit.mu_coeffs[0] - 2.0) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(fit.mu_coeffs[1] - 0.5) < 3.0 * se);
}

TEST_CASE("heteroscedastic scale signal is recovered") {
    Rng rng(17);
    const int n = 8000;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        const double x = std::sin(2.0 * M_PI * t / 365.25);
        X(t, 0) = 1.0;
        X(t, 1) = x;
        y[t] = std::exp(0.3 * x) * rng.normal();
    }
    const LocationScaleFit fit = fit_location_scale(y, X);
    CHECK(std::fabs(fit.log_sigma_coeffs[1] - 0.3) < 3.0 * std::sqrt(1.0 / n));
}

TEST_CASE("constant series is flagged degenerate") {
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(100, 4.2);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(100, 1);
    const LocationScaleFit fit = fit_location_scale(y, X);
    CHECK(fit.degenerate);
}

TEST_CASE("rank-deficient design is rejected") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(50, 2);  // duplicated intercept
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(50, 0, 1);
    CHECK_THROWS_AS(fit_location_scale(y, X), validation_error);
}

TEST_CASE("standardize round trip") {
    Rng rng(19);
    const int n = 500;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        X(t, 0) = 1.0;
        X(t, 1) = rng.uniform();
        y[t] = 1.0 + 2.0 * X(t, 1) + 0.5 * rng.normal();
    }
    const LocationScaleFit fit = fit_location_scale(y, X);
    const Eigen::VectorXd z = standardize(y, fit, X);
    const Eigen::VectorXd mu = X * fit.mu_coeffs;
    const Eigen::VectorXd eta = X * fit.log_sigma_coeffs;
    for (int t = 0; t < n; ++t)
        CHECK(mu[t] + std::exp(eta[t]) * z[t] == doctest::Approx(y[t]).epsilon(1e-10));

    // identity when mu = 0, sigma = 1
    LocationScaleFit unit;
    unit.mu_coeffs = Eigen::VectorXd::Zero(2);
    unit.log_sigma_coeffs = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd same = standardize(y, unit, X);
    CHECK((same - y).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gpd fit on exponential tails gives shape near zero") {
    Rng rng(23);
    const int n = 20000;
    Eigen::VectorXd z(n);
    for (int t = 0; t < n; ++t) z[t] = rng.exponential();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    const GpdFit fit = fit_gpd(z, X, 0.8);
    CHECK(fit.converged);
    CHECK(fit.n_exceed >= 30);
    const double se = (1.0 + fit.xi) / std::sqrt(static_cast<double>(fit.n_exceed));
    CHECK(std::fabs(fit.xi) < 3.0 * se);
    // exponential excesses have unit scale; asymptotic var of the log scale
    // estimate is 2 (1 + xi) / n_exceed
    const double se_logpsi =
        std::sqrt(2.0 * (1.0 + fit.xi) / static_cast<double>(fit.n_exceed));
    CHECK(std::fabs(fit.psi_coeffs[0]) < 3.0 * se_logpsi);
}

TEST_CASE("gpd fit recovers positive shape") {
    Rng rng(29);
    const int n = 25000;
    const double xi = 0.2;
    Eigen::VectorXd z(n);
    for (int t = 0; t < n; ++t) {
        const double u = rng.uniform_open();
        z[t] = (std::pow(u, -xi) - 1.0) / xi;  // GPD(1, 0.2) inverse cdf
    }
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    const GpdFit fit = fit_gpd(z, X, 0.8);
    const double se = (1.0 + xi) / std::sqrt(static_cast<double>(fit.n_exceed));
    CHECK(std::fabs(fit.xi - xi) < 3.0 * se);
    // excess scale above threshold u is 1 + xi u
    const double psi_true = 1.0 + xi * fit.threshold;
    CHECK(std::fabs(std::exp(fit.psi_coeffs[0]) - psi_true) < 3.0 * psi_true * se);
}

TEST_CASE("too few exceedances is a validation error") {
    Rng rng(31);
    Eigen::VectorXd z(50);
    for (int t = 0; t < 50; ++t) z[t] = rng.exponential();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(50, 1);
    CHECK_THROWS_AS(fit_gpd(z, X, 0.8), validation_error);
}

TEST_CASE("exponential transform examples") {
    CHECK(to_exponential(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(to_exponential(1.0 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    double prev = -1.0;
    for (double u : {0.01, 0.2, 0.5, 0.9, 0.999}) {
        const double e = to_exponential(u);
        CHECK(e > prev);
        prev = e;
    }
    CHECK_THROWS_AS(to_exponential(0.0), validation_error);
    CHECK_THROWS_AS(to_exponential(1.0), validation_error);
    CHECK_THROWS_AS(to_exponential(-0.2), validation_error);
}

TEST_CASE("full marginal model invariants") {
    const GridDataset ds = tiny_dataset(4000, 2, 37);
    const MarginalModel model = fit_marginal_model(ds, {}, 0.8, true, 2);
    REQUIRE(model.sites.size() == 2);

    for (int j = 0; j < 2; ++j) {
        const SiteMarginal& site = model.sites[j];
        long above = 0;
        for (long t = 0; t < site.n; ++t) above += site.z[t] > site.gpd.threshold;
        CHECK(std::fabs(above / static_cast<double>(site.n) - 0.2) < 0.005);
    }

    const Eigen::MatrixXd exp_data = to_exponential_matrix(model);
    CHECK(exp_data.rows() == model.n_usable);
    for (int j = 0; j < 2; ++j) {
        const double mean = exp_data.col(j).mean();
        CHECK(std::fabs(mean - 1.0) < 3.0 / std::sqrt(static_cast<double>(model.n_usable)));
        CHECK(exp_data.col(j).minCoeff() > 0.0);
    }
}

TEST_CASE("semiparametric cdf branches and continuity") {
    const GridDataset ds = tiny_dataset(3000, 1, 41);
    const MarginalModel model = fit_marginal_model(ds, {}, 0.8, false, 1);
    const SiteMarginal& site = model.sites[0];

    // minimum sample value maps to 1/(n+1)
    const double zmin = site.sorted_z.front();
    CHECK(semiparametric_cdf(zmin, 0, 0, model) ==
          doctest::Approx(1.0 / (site.n + 1.0)).epsilon(1e-12));

    // continuity at the threshold: both branches agree
    const double u_thr = site.gpd.threshold;
    const double tail_at_thr = semiparametric_cdf(u_thr, 0, 0, model);
    CHECK(tail_at_thr == doctest::Approx(site.phi_u).epsilon(1e-9));
    const double just_below = semiparametric_cdf(u_thr - 1e-9, 0, 0, model);
    CHECK(std::fabs(tail_at_thr - just_below) < 1e-3);

    // tail branch monotone and in (0,1)
    double prev = 0.0;
    for (double dz : {0.01, 0.3, 1.0, 3.0, 10.0}) {
        const double u = semiparametric_cdf(u_thr + dz, 0, 0, model);
        CHECK(u > prev);
        CHECK(u < 1.0);
        prev = u;
    }
}

TEST_CASE("raw threshold conversion is monotone and matches ranks below threshold") {
    const GridDataset ds = tiny_dataset(3000, 1, 43);
    const MarginalModel model = fit_marginal_model(ds, {}, 0.8, false, 1);
    const SiteMarginal& site = model.sites[0];

    // a raw value observed below the threshold collapses to its rank branch
    double below = 0.0;
    for (long t = 0; t < site.n; ++t)
        if (site.z[t] < site.gpd.threshold && site.z[t] > below) below = site.z[t];
    const double q = leadbetter_to_exponential(below, 0, model);
    const double expected = to_exponential(semiparametric_cdf(below, 0, 0, model));
    CHECK(q == doctest::Approx(expected).epsilon(1e-9));

    double prev = 0.0;
    for (double raw : {0.2, 0.8, 2.0, 4.0, 7.0}) {
        const double v = leadbetter_to_exponential(raw, 0, model);
        CHECK(v >= prev);
        prev = v;
    }

    bool extrapolated = false;
    const double far = leadbetter_to_exponential(1e4, 0, model, &extrapolated);
    CHECK(extrapolated);
    CHECK(far > prev);
}
