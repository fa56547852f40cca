#include <doctest.h>

#include <cmath>

#include "gex/deform.hpp"
#include "gex/synthetic.hpp"

using namespace gex;

TEST_CASE("independent exponentials have near-zero tail dependence") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::IndependentExp;
    spec.d = 4;
    spec.n = 200000;
    spec.seed = 101;
    const GridDataset ds = generate(spec);
    const ChiMatrix chi = empirical_chi_matrix(ds.values, 0.99);
    // independence: P(both exceed) = (1-u)^2, so chi ~ 1-u = 0.01;
    // 3 binomial s.e. of the joint count, scaled to the chi estimate
    const double n1mu = spec.n * 0.01;
    const double se = 3.0 * std::sqrt(spec.n * 0.01 * 0.01) / n1mu;
    for (int i = 0; i < spec.d; ++i)
        for (int j = i + 1; j < spec.d; ++j)
            CHECK(std::fabs(chi.chi(i, j) - 0.01) < se + 1e-12);
}

TEST_CASE("comonotone columns have tail dependence one") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Comonotone;
    spec.d = 4;
    spec.n = 20000;
    spec.seed = 55;
    const GridDataset ds = generate(spec);
    for (double u : {0.9, 0.99}) {
        const ChiMatrix chi = empirical_chi_matrix(ds.values, u);
        for (int i = 0; i < spec.d; ++i)
            for (int j = 0; j < spec.d; ++j)
                CHECK(chi.chi(i, j) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("meta gaussian columns carry exponential margins") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 9;
    spec.n = 20000;
    spec.phi = 1.0;
    spec.kappa = 1.5;
    spec.seed = 7;
    const GridDataset ds = generate(spec);
    REQUIRE(ds.n_sites() == 9);
    REQUIRE(ds.n_times() == spec.n);
    for (int j = 0; j < spec.d; ++j) {
        const double mean = ds.values.col(j).mean();
        CHECK(std::fabs(mean - 1.0) < 3.0 / std::sqrt(static_cast<double>(spec.n)));
    }
    // positive spatial dependence well above the independence level
    const ChiMatrix chi = empirical_chi_matrix(ds.values, 0.95);
    CHECK(chi.chi(0, 1) > 0.1);
}

TEST_CASE("generation is reproducible per seed") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::MetaGaussian;
    spec.d = 4;
    spec.n = 500;
    spec.seed = 99;
    const GridDataset a = generate(spec);
    const GridDataset b = generate(spec);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    spec.seed = 100;
    const GridDataset c = generate(spec);
    CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("rejection sampler respects the radial window") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::KnownGaugeRejection;
    spec.d = 3;
    spec.n = 2000;
    spec.phi = 1.5;
    spec.kappa = 1.0;
    spec.gamma = 2.0;
    spec.r_lo = 1.0;
    spec.r_hi = 6.0;
    spec.seed = 3;
    const GridDataset ds = generate(spec);
    REQUIRE(ds.n_times() == spec.n);
    for (long t = 0; t < ds.n_times(); ++t) {
        const double r = ds.values.row(t).sum();
        CHECK(r >= spec.r_lo);
        CHECK(r <= spec.r_hi);
        CHECK(ds.values.row(t).minCoeff() >= 0.0);
    }
}

TEST_CASE("synthetic validation errors") {
    SyntheticSpec spec;
    spec.d = 0;
    CHECK_THROWS_AS(generate(spec), validation_error);
    spec.d = 4;
    spec.n = 0;
    CHECK_THROWS_AS(generate(spec), validation_error);
    spec.kind = SyntheticKind::KnownGaugeRejection;
    spec.n = 10;
    spec.r_lo = 5.0;
    spec.r_hi = 2.0;
    CHECK_THROWS_AS(generate(spec), validation_error);
}
