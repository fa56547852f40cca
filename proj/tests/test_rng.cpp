#include <doctest.h>

#include <cmath>
#include <vector>

#include "gex/rng.hpp"

using gex::Rng;

TEST_CASE("identical seeds produce identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds produce different streams") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a.uniform() == b.uniform();
    CHECK(same < 5);
}

TEST_CASE("split is independent of draws taken so far") {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 50; ++i) (void)b.uniform();
    Rng sa = a.split(3), sb = b.split(3);
    for (int i = 0; i < 100; ++i) CHECK(sa.uniform() == sb.uniform());
}

TEST_CASE("split indices give distinct streams") {
    Rng r(9);
    Rng s0 = r.split(0), s1 = r.split(1);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += s0.uniform() == s1.uniform();
    CHECK(same < 5);
}

TEST_CASE("uniform lies in [0,1) with mean near one half") {
    Rng r(123);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // se of the mean is 1/sqrt(12 n)
    CHECK(std::fabs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform_index stays in range and is roughly uniform") {
    Rng r(55);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto k = r.uniform_index(7);
        REQUIRE(k < 7);
        ++counts[static_cast<int>(k)];
    }
    for (int c : counts) CHECK(std::fabs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
}

TEST_CASE("exponential draws have unit mean") {
    Rng r(77);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += r.exponential();
    CHECK(std::fabs(sum / n - 1.0) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("normal draws match standard moments") {
    Rng r(99);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}
