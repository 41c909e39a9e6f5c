#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "structest/stats.hpp"

using namespace structest;

TEST_CASE("normal cdf reference values") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
    for (double x : {-2.5, -0.3, 0.0, 0.7, 3.1})
        CHECK(normal_cdf(-x) == doctest::Approx(1.0 - normal_cdf(x)).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the cdf") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(normal_quantile(0.0013498980316300945) == doctest::Approx(-3.0).epsilon(1e-9));
    for (double x : {-3.0, -1.0, 0.0, 0.7, 2.5})
        CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(-0.2), std::invalid_argument);
}

TEST_CASE("ks distance to standard normal") {
    SUBCASE("single point at the median") {
        CHECK(ks_to_standard_normal({0.0}) == doctest::Approx(0.5).epsilon(1e-9));
    }

    SUBCASE("stratified normal quantiles have tiny distance") {
        const int n = 4096;
        std::vector<double> sample(n);
        for (int i = 0; i < n; ++i) sample[i] = normal_quantile((i + 0.5) / n);
        CHECK(ks_to_standard_normal(sample) < 0.001);
    }

    SUBCASE("a unit shift is detected") {
        const int n = 4096;
        std::vector<double> sample(n);
        for (int i = 0; i < n; ++i) sample[i] = normal_quantile((i + 0.5) / n) + 1.0;
        CHECK(ks_to_standard_normal(sample) > 0.3);
    }

    SUBCASE("empty sample rejected") {
        CHECK_THROWS_AS(ks_to_standard_normal({}), std::invalid_argument);
    }
}

TEST_CASE("chi-square goodness of fit") {
    SUBCASE("two balanced bins") {
        const double p = chi_square_gof_pvalue({55.0, 45.0}, {50.0, 50.0});
        CHECK(p == doctest::Approx(0.31731050786291415).epsilon(1e-6));
    }

    SUBCASE("perfect fit gives p = 1") {
        const double p = chi_square_gof_pvalue({30.0, 30.0, 40.0}, {30.0, 30.0, 40.0});
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("gross mismatch gives p near 0") {
        const double p = chi_square_gof_pvalue({100.0, 0.0}, {50.0, 50.0});
        CHECK(p < 1e-12);
    }

    SUBCASE("small expected bins are pooled, keeping the p-value sane") {
        const double p = chi_square_gof_pvalue({99.0, 4.0, 2.0}, {100.0, 3.0, 2.0});
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
    }

    SUBCASE("size mismatch rejected") {
        CHECK_THROWS_AS(chi_square_gof_pvalue({1.0}, {1.0, 2.0}), std::invalid_argument);
    }

    SUBCASE("everything pooled into one bin rejected") {
        CHECK_THROWS_AS(chi_square_gof_pvalue({1.0, 1.0}, {1.0, 1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("wilson interval") {
    SUBCASE("zero successes") {
        const auto [lo, hi] = wilson_interval(0, 100);
        CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(hi == doctest::Approx(0.0369934).epsilon(1e-3));
    }

    SUBCASE("all successes") {
        const auto [lo, hi] = wilson_interval(100, 100);
        CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(lo == doctest::Approx(1.0 - 0.0369934).epsilon(1e-3));
    }

    SUBCASE("half successes") {
        const auto [lo, hi] = wilson_interval(50, 100);
        CHECK(lo == doctest::Approx(0.403838).epsilon(1e-3));
        CHECK(hi == doctest::Approx(0.596162).epsilon(1e-3));
    }

    SUBCASE("interval brackets the point estimate") {
        for (long k : {1L, 13L, 77L, 199L}) {
            const auto [lo, hi] = wilson_interval(k, 200);
            const double phat = static_cast<double>(k) / 200.0;
            CHECK(lo <= phat);
            CHECK(hi >= phat);
        }
    }

    SUBCASE("higher confidence widens the interval") {
        const auto [lo95, hi95] = wilson_interval(30, 100, 0.95);
        const auto [lo99, hi99] = wilson_interval(30, 100, 0.99);
        CHECK(lo99 < lo95);
        CHECK(hi99 > hi95);
    }

    SUBCASE("bad counts rejected") {
        CHECK_THROWS_AS(wilson_interval(-1, 10), std::invalid_argument);
        CHECK_THROWS_AS(wilson_interval(11, 10), std::invalid_argument);
        CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
    }
}
