#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gex/diagnostics.hpp"
#include "gex/synthetic.hpp"

using namespace gex;

namespace {

GaugeParams near_params(int d, double lambda, double c_tau, double gamma = 2.0) {
    std::vector<Eigen::Vector2d> coords;
    for (int j = 0; j < d; ++j) coords.emplace_back(1.0, 1.0 + 0.7 * j);
    return GaugeParams(lambda, 1.0, 1.0, gamma, c_tau, 0.8, std::move(coords));
}

// Exceedance set drawn exactly from the fitted radial model: angles from an
// arbitrary distribution, radii from the truncated gamma given the angle.
ExceedanceSet model_exceedances(const GaugeParams& params, std::size_t n, Rng& rng) {
    ExceedanceSet exc;
    exc.d = params.dim();
    exc.n_total = 5 * n;
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd z(params.dim());
        for (int j = 0; j < params.dim(); ++j) z[j] = rng.exponential() + 1e-6;
        AngularPoint p = radial_angular(z);
        const double thr = params.radial_threshold(p.w);
        p.r = sample_radius(p.w, 1.0, params, rng);
        exc.thresholds.push_back(thr);
        exc.points.push_back(std::move(p));
    }
    return exc;
}

}  // namespace

TEST_CASE("probability integral transform closed form") {
    // lambda d = 1, g = 1: PIT = 1 - exp(-(r - r_tau))
    const int d = 3;
    std::vector<Eigen::Vector2d> coords;
    for (int j = 0; j < d; ++j) coords.emplace_back(1.0, 1.0 + 1e6 * j);
    const GaugeParams params(1.0 / d, 1.0, 1.0, 2.0, 1.0, 0.8, coords);
    AngularPoint p;
    p.w = Eigen::VectorXd::Constant(d, 1.0 / d);
    for (double r : {1.001, 1.5, 2.0, 5.0, 20.0}) {
        p.r = r;
        const double u = pit_value(p, 1.0, params);
        CHECK(u == doctest::Approx(1.0 - std::exp(-(r - 1.0))).epsilon(1e-12));
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("pp points on model-consistent data stay in the bands") {
    const GaugeParams params = near_params(3, 1.0, 2.0);
    Rng rng(7);
    const ExceedanceSet exc = model_exceedances(params, 2000, rng);
    Rng band_rng(11);
    const DiagnosticSeries pp = pp_points(exc, params, 500, band_rng);

    REQUIRE(pp.x.size() == exc.points.size());
    REQUIRE(pp.y.size() == pp.x.size());
    REQUIRE(pp.band_lo.size() == pp.x.size());
    REQUIRE(pp.band_hi.size() == pp.x.size());

    std::size_t inside = 0;
    for (std::size_t i = 0; i < pp.x.size(); ++i) {
        if (i > 0) CHECK(pp.x[i] > pp.x[i - 1]);
        CHECK(pp.x[i] > 0.0);
        CHECK(pp.x[i] < 1.0);
        CHECK(pp.y[i] >= 0.0);
        CHECK(pp.y[i] <= 1.0);
        if (i > 0) CHECK(pp.y[i] >= pp.y[i - 1]);
        CHECK(pp.band_lo[i] <= pp.band_hi[i]);
        if (pp.y[i] >= pp.band_lo[i] && pp.y[i] <= pp.band_hi[i]) ++inside;
    }
    // correctly specified model: the vast majority of points sit in the band
    CHECK(inside >= static_cast<std::size_t>(0.9 * pp.x.size()));
    // points hug the diagonal
    double max_dev = 0.0;
    for (std::size_t i = 0; i < pp.x.size(); ++i)
        max_dev = std::max(max_dev, std::fabs(pp.y[i] - pp.x[i]));
    CHECK(max_dev < 0.05);
}

TEST_CASE("single exceedance pp layout") {
    const GaugeParams params = near_params(3, 1.0, 2.0);
    Rng rng(13);
    const ExceedanceSet exc = model_exceedances(params, 1, rng);
    Rng band_rng(17);
    const DiagnosticSeries pp = pp_points(exc, params, 100, band_rng);
    REQUIRE(pp.x.size() == 1);
    CHECK(pp.x[0] == doctest::Approx(0.5));
    CHECK(pp.y[0] == doctest::Approx(pit_value(exc.points[0], exc.thresholds[0], params)));
}

TEST_CASE("qq points are the exponential transform of the pp points") {
    const GaugeParams params = near_params(3, 1.0, 2.0);
    Rng rng(19);
    const ExceedanceSet exc = model_exceedances(params, 500, rng);
    Rng r1(23), r2(23);
    const DiagnosticSeries pp = pp_points(exc, params, 100, r1);
    const DiagnosticSeries qq = qq_points(exc, params, 100, r2);
    REQUIRE(qq.x.size() == pp.x.size());
    for (std::size_t i = 0; i < pp.x.size(); ++i) {
        CHECK(qq.x[i] == doctest::Approx(-std::log1p(-pp.x[i])).epsilon(1e-12));
        CHECK(qq.y[i] == doctest::Approx(-std::log1p(-pp.y[i])).epsilon(1e-12));
        if (i > 0) CHECK(qq.x[i] > qq.x[i - 1]);
    }
    // a pp value of one half maps to log 2
    CHECK(-std::log1p(-0.5) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("model chi series structure and range") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 4;
    spec.n = 20000;
    spec.seed = 29;
    const GridDataset ds = generate(spec);
    const GaugeParams params(1.0, 1.0, 1.5, 2.0, 2.5, 0.8, ds.sites);
    const ExceedanceSet exc = make_exceedance_set(ds.values, params);
    const Eigen::MatrixXd h = pairwise_distances(ds.sites);

    Rng rng(31);
    const DiagnosticSeries chi = model_chi(params, exc, 0.95, h, 100000, rng);
    const std::size_t n_pairs = 4 * 3 / 2;
    REQUIRE(chi.x.size() == n_pairs);
    REQUIRE(chi.y.size() == n_pairs);
    REQUIRE(chi.raw.size() == n_pairs);
    std::size_t p = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            CHECK(chi.x[p] == h(i, j));
            CHECK(chi.y[p] >= 0.0);
            CHECK(chi.y[p] <= 1.0);
            // y is the clamped raw value
            CHECK(chi.y[p] == doctest::Approx(std::clamp(chi.raw[p], 0.0, 1.0)));
            ++p;
        }
    CHECK(chi.level == 0.95);
}

TEST_CASE("empirical chi flattening and binning") {
    ChiMatrix cm;
    cm.u = 0.9;
    cm.chi.resize(3, 3);
    cm.chi << 1.0, 0.4, 0.3,
              0.4, 1.0, 0.2,
              0.3, 0.2, 1.0;
    Eigen::MatrixXd h(3, 3);
    h << 0, 1, 2,
         1, 0, 4,
         2, 4, 0;
    const DiagnosticSeries s = chi_series(cm, h);
    REQUIRE(s.x.size() == 3);
    CHECK(s.x[0] == 1.0);
    CHECK(s.y[0] == 0.4);
    CHECK(s.x[1] == 2.0);
    CHECK(s.y[1] == 0.3);
    CHECK(s.x[2] == 4.0);
    CHECK(s.y[2] == 0.2);

    // more bins than pairs: one pair per bin, averages are the values
    const DiagnosticSeries b = bin_chi(s, 15);
    REQUIRE(b.x.size() == 3);
    CHECK(b.y[0] == doctest::Approx(0.4));
    CHECK(b.y[2] == doctest::Approx(0.2));

    // a single bin averages everything
    const DiagnosticSeries one = bin_chi(s, 1);
    REQUIRE(one.x.size() == 1);
    CHECK(one.y[0] == doctest::Approx((0.4 + 0.3 + 0.2) / 3.0));
    CHECK(one.x[0] == doctest::Approx((1.0 + 2.0 + 4.0) / 3.0));
}

TEST_CASE("series csv round trip layout") {
    DiagnosticSeries s;
    s.kind = DiagnosticKind::PP;
    s.x = {0.25, 0.5, 0.75};
    s.y = {0.2, 0.55, 0.8};
    s.band_lo = {0.1, 0.4, 0.7};
    s.band_hi = {0.35, 0.65, 0.9};
    const std::string path = "diag_series_test.csv";
    save_series_csv(s, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,lo,hi");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    in.close();
    std::remove(path.c_str());

    DiagnosticSeries bare;
    bare.x = {1.0};
    bare.y = {2.0};
    save_series_csv(bare, path);
    std::ifstream in2(path);
    std::getline(in2, header);
    CHECK(header == "x,y");
    in2.close();
    std::remove(path.c_str());
}
