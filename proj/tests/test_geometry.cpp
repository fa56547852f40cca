#include <doctest.h>

#include <cmath>
#include <vector>

#include "gex/geometry.hpp"
#include "gex/ingest.hpp"
#include "gex/rng.hpp"
#include "gex/special.hpp"

using namespace gex;

namespace {

Eigen::VectorXd random_simplex(int d, Rng& rng) {
    Eigen::VectorXd w(d);
    for (int j = 0; j < d; ++j) w[j] = rng.exponential();
    return w / w.sum();
}

Eigen::MatrixXd identity_distances(int d) {
    // distances so large the powered-exponential correlation is numerically 0
    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(d, d, 1e6);
    h.diagonal().setZero();
    return h;
}

}  // namespace

TEST_CASE("radial angular basic examples") {
    Eigen::VectorXd z(2);
    z << 1, 1;
    const AngularPoint p = radial_angular(z);
    CHECK(p.r == 2.0);
    CHECK(p.w[0] == 0.5);
    CHECK(p.w[1] == 0.5);

    Eigen::VectorXd v(4);
    v << 3, 0, 0, 0;
    const AngularPoint q = radial_angular(v, 7);
    CHECK(q.r == 3.0);
    CHECK(q.w[0] == 1.0);
    CHECK(q.w[3] == 0.0);
    CHECK(q.t == 7);

    CHECK_THROWS_AS(radial_angular(Eigen::VectorXd::Zero(3)), validation_error);
}

TEST_CASE("radial angular reconstruction identity") {
    Rng rng(2);
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::VectorXd z(5);
        for (int j = 0; j < 5; ++j) z[j] = rng.exponential();
        const AngularPoint p = radial_angular(z);
        CHECK((p.r * p.w - z).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::fabs(p.w.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("powered exponential correlation values") {
    Eigen::MatrixXd h(2, 2);
    h << 0, 1, 1, 0;
    const Eigen::MatrixXd s = powexp_correlation(h, 0.830, 1.89);
    CHECK(s(0, 0) == 1.0);
    const double expected = std::exp(-std::pow(1.0 / 0.830, 1.89));
    CHECK(s(0, 1) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(s(0, 1) == doctest::Approx(0.241).epsilon(0.01));

    // strictly decreasing in distance
    double prev = 1.0;
    for (double dist : {0.5, 1.0, 2.0, 4.0}) {
        Eigen::MatrixXd hh(2, 2);
        hh << 0, dist, dist, 0;
        const double v = powexp_correlation(hh, 0.830, 1.89)(0, 1);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("correlation model quadratic form matches explicit inverse") {
    const auto coords = grid_coordinates(2);
    const Eigen::MatrixXd h = pairwise_distances(coords);
    const CorrelationModel corr(h, 1.3, 1.2);
    const Eigen::MatrixXd inv = corr.sigma().inverse();
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd v(4);
        for (int j = 0; j < 4; ++j) v[j] = rng.normal();
        CHECK(corr.quad_form(v) ==
              doctest::Approx(v.dot(inv * v)).epsilon(1e-9));
    }
}

TEST_CASE("gauge collapses to known norms under identity correlation") {
    const CorrelationModel id2(identity_distances(2), 1.0, 1.0);
    Eigen::VectorXd w(2);
    w << 0.5, 0.5;
    CHECK(gauge(w, id2, 1.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));

    Rng rng(9);
    const CorrelationModel id4(identity_distances(4), 1.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const Eigen::VectorXd ws = random_simplex(4, rng);
        CHECK(std::fabs(gauge(ws, id4, 2.0) - 1.0) < 1e-10);
    }
}

TEST_CASE("gauge is order-1 homogeneous") {
    Rng rng(13);
    const auto coords = grid_coordinates(2);
    const CorrelationModel corr(pairwise_distances(coords), 1.5, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        Eigen::VectorXd z(4);
        for (int j = 0; j < 4; ++j) z[j] = rng.exponential() + 0.01;
        const double c = 0.1 + 10.0 * rng.uniform();
        for (double g : {0.7, 1.0, 2.0, 3.5}) {
            CHECK(std::fabs(gauge(c * z, corr, g) - c * gauge(z, corr, g)) < 1e-10);
        }
    }
}

TEST_CASE("gauge is permutation equivariant") {
    Rng rng(17);
    std::vector<Eigen::Vector2d> coords = {{0, 0}, {1, 0}, {0, 2}, {3, 1}};
    const CorrelationModel corr(pairwise_distances(coords), 1.5, 1.3);
    const std::vector<int> perm = {2, 0, 3, 1};
    std::vector<Eigen::Vector2d> pcoords(4);
    for (int j = 0; j < 4; ++j) pcoords[j] = coords[perm[j]];
    const CorrelationModel pcorr(pairwise_distances(pcoords), 1.5, 1.3);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::VectorXd w = random_simplex(4, rng);
        Eigen::VectorXd pw(4);
        for (int j = 0; j < 4; ++j) pw[j] = w[perm[j]];
        CHECK(std::fabs(gauge(w, corr, 1.4) - gauge(pw, pcorr, 1.4)) < 1e-12);
    }
}

TEST_CASE("gamma quantile threshold constant") {
    CHECK(c_tau_from_quantile(1.0, 0.8) ==
          doctest::Approx(-std::log(0.2)).epsilon(1e-12));

    // bisection on the incomplete gamma integral for shape 2
    double lo = 0.0, hi = 20.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (1.0 - std::exp(-mid) * (1.0 + mid) < 0.8 ? lo : hi) = mid;
    }
    CHECK(c_tau_from_quantile(2.0, 0.8) == doctest::Approx(lo).epsilon(1e-9));
    CHECK(c_tau_from_quantile(2.0, 0.8) == doctest::Approx(2.994).epsilon(1e-3));

    double prev = 0.0;
    for (double tau : {0.1, 0.4, 0.7, 0.9, 0.99}) {
        const double c = c_tau_from_quantile(3.0, tau);
        CHECK(c > prev);
        prev = c;
    }
}

TEST_CASE("empirical calibration hits the target exceedance fraction") {
    Rng rng(23);
    const int n = 5000;
    std::vector<double> radii(n), gvals(n);
    for (int i = 0; i < n; ++i) {
        radii[i] = rng.exponential() * 3.0;
        gvals[i] = 0.5 + rng.uniform();
    }
    const double c = calibrate_c_tau(radii, gvals, 0.8);
    int exceed = 0;
    for (int i = 0; i < n; ++i) exceed += radii[i] > c / gvals[i];
    CHECK(std::fabs(exceed / static_cast<double>(n) - 0.2) <= 1.0 / n + 1e-12);

    // quantile equivariance under radial doubling
    std::vector<double> radii2(n);
    for (int i = 0; i < n; ++i) radii2[i] = 2.0 * radii[i];
    CHECK(calibrate_c_tau(radii2, gvals, 0.8) == doctest::Approx(2.0 * c).epsilon(1e-12));

    // degenerate: all products equal
    const std::vector<double> ones(100, 1.0);
    CHECK(calibrate_c_tau(ones, ones, 0.8) == 1.0);
}

TEST_CASE("radial threshold scaling") {
    const auto coords = grid_coordinates(2);
    GaugeParams params(1.0, 1.5, 1.0, 2.0, 3.7, 0.8, coords);
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::VectorXd w = random_simplex(4, rng);
        const double g = params.threshold_gauge(w);
        CHECK(params.radial_threshold(w) == doctest::Approx(3.7 / g).epsilon(1e-12));
    }
}

TEST_CASE("identity correlation with gamma 2 gives constant threshold") {
    // coordinates far apart so the correlation is numerically the identity
    std::vector<Eigen::Vector2d> coords = {{0, 0}, {1e5, 0}, {0, 1e5}, {1e5, 1e5}};
    GaugeParams params(1.0, 1.0, 1.0, 2.0, 2.5, 0.8, coords);
    Rng rng(37);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::VectorXd w = random_simplex(4, rng);
        CHECK(params.radial_threshold(w) == doctest::Approx(2.5).epsilon(1e-9));
    }
}
