#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "structest/canonical_test.hpp"
#include "structest/graph.hpp"
#include "structest/rng.hpp"
#include "structest/stats.hpp"

using namespace structest;

namespace {

IsingTestConfig c4_config(double threshold) {
    static const RegularGraph g = RegularGraph::circulant(4, 2);
    IsingTestConfig cfg;
    cfg.graph = &g;
    cfg.threshold = threshold;
    return cfg;
}

}  // namespace

TEST_CASE("ising test on C4 hand examples") {
    // On the l=2 sphere of C4 the quadratic form has mean -4/3 and variance
    // 32/9, so (+,+,-,-) standardizes to +1/sqrt(2) and the alternating
    // config to -sqrt(2).
    const SpinConfig balanced = SpinConfig::from_line("++--");
    const SpinConfig alternating = SpinConfig::from_line("+-+-");

    SUBCASE("high threshold accepts") {
        const Decision d = ising_test(balanced, c4_config(10.0));
        CHECK(d.verdict == Verdict::H0);
        REQUIRE(d.standardized.has_value());
        CHECK(*d.standardized == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(d.sphere_label == doctest::Approx(0.0));
        CHECK(d.threshold_used == doctest::Approx(10.0));
    }

    SUBCASE("zero threshold rejects the positive statistic, accepts the negative") {
        CHECK(ising_test(balanced, c4_config(0.0)).verdict == Verdict::H1);
        const Decision d = ising_test(alternating, c4_config(0.0));
        CHECK(d.verdict == Verdict::H0);
        REQUIRE(d.standardized.has_value());
        CHECK(*d.standardized == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
    }

    SUBCASE("negative threshold rejects") {
        CHECK(ising_test(balanced, c4_config(-1.0)).verdict == Verdict::H1);
    }

    SUBCASE("a tie goes to rejection") {
        const Decision first = ising_test(balanced, c4_config(10.0));
        REQUIRE(first.standardized.has_value());
        const Decision tie = ising_test(balanced, c4_config(*first.standardized));
        CHECK(tie.verdict == Verdict::H1);
    }
}

TEST_CASE("ising test band escape decides without the statistic") {
    const SpinConfig ones = SpinConfig::from_line("++++");
    const Decision d = ising_test(ones, c4_config(1000.0));
    CHECK(d.verdict == Verdict::H1);
    CHECK_FALSE(d.standardized.has_value());
    CHECK(d.sphere_label == doctest::Approx(1.0));

    SUBCASE("the band is two-sided") {
        const SpinConfig none = SpinConfig::from_line("----");
        CHECK(ising_test(none, c4_config(1000.0)).verdict == Verdict::H1);
    }

    SUBCASE("epsilon controls the band") {
        // m = 0.5 escapes only when 1 - eps < 0.5
        const SpinConfig x = SpinConfig::from_line("+++-");
        IsingTestConfig cfg = c4_config(1000.0);
        cfg.epsilon = 0.6;
        const Decision esc = ising_test(x, cfg);
        CHECK(esc.verdict == Verdict::H1);
        CHECK_FALSE(esc.standardized.has_value());
        // m = 0 stays in-band under the same epsilon and runs the statistic
        CHECK(ising_test(SpinConfig::from_line("++--"), cfg).verdict == Verdict::H0);
    }

    SUBCASE("degenerate sphere inside the band is a configuration error") {
        // eps <= 2/n leaves l = n-1 in-band, where the cut is constant
        const SpinConfig x = SpinConfig::from_line("+++-");
        IsingTestConfig cfg = c4_config(1000.0);
        cfg.epsilon = 0.1;
        CHECK_THROWS_AS(ising_test(x, cfg), std::invalid_argument);
    }
}

TEST_CASE("ising test table overload agrees with direct computation") {
    const RegularGraph g = RegularGraph::circulant(10, 4);
    IsingTestConfig cfg;
    cfg.graph = &g;
    cfg.threshold = 0.4;
    cfg.epsilon = 0.25;  // band excludes the constant-cut spheres l in {1,9}
    const auto table = ising_moments_table(10, 4);
    REQUIRE(table.size() == 11);
    Rng rng(41);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<int8_t> spins(10);
        for (auto& s : spins) s = rng.bernoulli(0.5) ? 1 : -1;
        const SpinConfig x(spins);
        const Decision a = ising_test(x, cfg);
        const Decision b = ising_test(x, cfg, table);
        CHECK(a.verdict == b.verdict);
        CHECK(a.standardized.has_value() == b.standardized.has_value());
        if (a.standardized)
            CHECK(*a.standardized == doctest::Approx(*b.standardized).epsilon(1e-12));
        CHECK(a.sphere_label == doctest::Approx(b.sphere_label));
    }

    SUBCASE("wrong-size table rejected") {
        const auto bad = ising_moments_table(8, 4);
        const SpinConfig x = SpinConfig::from_line("++++++----");
        CHECK_THROWS_AS(ising_test(x, cfg, bad), std::invalid_argument);
    }
}

TEST_CASE("ising test validates its inputs") {
    const SpinConfig x = SpinConfig::from_line("++--");
    IsingTestConfig cfg;
    cfg.graph = nullptr;
    CHECK_THROWS_AS(ising_test(x, cfg), std::invalid_argument);

    const RegularGraph g = RegularGraph::circulant(6, 2);
    cfg.graph = &g;
    CHECK_THROWS_AS(ising_test(x, cfg), std::invalid_argument);

    IsingTestConfig bad_eps = c4_config(0.0);
    bad_eps.epsilon = 0.0;
    CHECK_THROWS_AS(ising_test(x, bad_eps), std::invalid_argument);
    bad_eps.epsilon = 1.0;
    CHECK_THROWS_AS(ising_test(x, bad_eps), std::invalid_argument);
}

TEST_CASE("ising decision is invariant under graph rotation") {
    const RegularGraph g = RegularGraph::circulant(8, 2);
    IsingTestConfig cfg;
    cfg.graph = &g;
    cfg.threshold = 0.3;
    cfg.epsilon = 0.3;
    Rng rng(43);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<int8_t> spins(8);
        for (auto& s : spins) s = rng.bernoulli(0.5) ? 1 : -1;
        std::vector<int8_t> rotated(8);
        for (int i = 0; i < 8; ++i) rotated[i] = spins[(i + 1) % 8];
        const Decision a = ising_test(SpinConfig(spins), cfg);
        const Decision b = ising_test(SpinConfig(rotated), cfg);
        CHECK(a.verdict == b.verdict);
        if (a.standardized && b.standardized)
            CHECK(*a.standardized == doctest::Approx(*b.standardized).epsilon(1e-12));
    }
}

TEST_CASE("ising rejection region shrinks as T grows") {
    const SpinConfig x = SpinConfig::from_line("++--");
    const Decision base = ising_test(x, c4_config(0.0));
    REQUIRE(base.standardized.has_value());
    const double s = *base.standardized;
    CHECK(ising_test(x, c4_config(s - 0.1)).verdict == Verdict::H1);
    CHECK(ising_test(x, c4_config(s + 0.1)).verdict == Verdict::H0);
}

TEST_CASE("ergm test on four-vertex hand examples") {
    ErgmTestConfig cfg;
    cfg.n = 4;

    SUBCASE("empty graph escapes a delta = 0.2 band") {
        cfg.delta = 0.2;
        cfg.threshold = 1000.0;
        const GraphSample empty(4);
        const Decision d = ergm_test(empty, cfg);
        CHECK(d.verdict == Verdict::H1);
        CHECK_FALSE(d.standardized.has_value());
        CHECK(d.sphere_label == doctest::Approx(0.0));
    }

    SUBCASE("two disjoint edges standardize to -2") {
        cfg.delta = 0.1;
        cfg.threshold = 0.0;
        GraphSample s(4);
        s.toggle(0, 1);
        s.toggle(2, 3);
        const Decision d = ergm_test(s, cfg);
        CHECK(d.verdict == Verdict::H0);
        REQUIRE(d.standardized.has_value());
        CHECK(*d.standardized == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(d.sphere_label == doctest::Approx(2.0));
    }

    SUBCASE("a path crosses a 0.4 threshold") {
        cfg.delta = 0.1;
        cfg.threshold = 0.4;
        GraphSample s(4);
        s.toggle(0, 1);
        s.toggle(1, 2);
        const Decision d = ergm_test(s, cfg);
        CHECK(d.verdict == Verdict::H1);
        REQUIRE(d.standardized.has_value());
        CHECK(*d.standardized == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("ergm test table overload and validation") {
    ErgmTestConfig cfg;
    cfg.n = 5;
    cfg.threshold = 0.2;
    cfg.delta = 0.25;  // band excludes the constant-wedge counts m in {1,9}
    const auto table = ergm_moments_table(5);
    REQUIRE(table.size() == 11);
    Rng rng(47);
    for (int rep = 0; rep < 200; ++rep) {
        GraphSample s(5);
        for (long long k = 0; k < GraphSample::pair_count(5); ++k)
            if (rng.bernoulli(0.5)) {
                const auto [u, v] = GraphSample::index_pair(5, k);
                s.toggle(u, v);
            }
        const Decision a = ergm_test(s, cfg);
        const Decision b = ergm_test(s, cfg, table);
        CHECK(a.verdict == b.verdict);
        CHECK(a.standardized.has_value() == b.standardized.has_value());
        if (a.standardized)
            CHECK(*a.standardized == doctest::Approx(*b.standardized).epsilon(1e-12));
    }

    SUBCASE("wrong-size table rejected") {
        GraphSample s(5);  // in-band edge count so the table is consulted
        s.toggle(0, 1);
        s.toggle(1, 2);
        s.toggle(2, 3);
        CHECK_THROWS_AS(ergm_test(s, cfg, ergm_moments_table(4)), std::invalid_argument);
    }

    SUBCASE("config size mismatch rejected") {
        const GraphSample s(4);
        CHECK_THROWS_AS(ergm_test(s, cfg), std::invalid_argument);
    }

    SUBCASE("bad delta rejected") {
        ErgmTestConfig bad;
        bad.n = 5;
        bad.delta = 0.5;
        const GraphSample s(5);
        CHECK_THROWS_AS(ergm_test(s, bad), std::invalid_argument);
    }
}

TEST_CASE("threshold selection rule") {
    SUBCASE("tail sum 0.02275 gives T near 1") {
        const double L = -std::log(0.02275 - 0.01);
        CHECK(threshold_from_rule(0.01, L, 1.0) == doctest::Approx(1.0).epsilon(1e-3));
    }

    SUBCASE("tail sum near 1/2 gives T near 0") {
        const double L = -std::log(0.0999);
        const double T = threshold_from_rule(0.4, L, 1.0);
        CHECK(T > 0.0);
        CHECK(T < 0.001);
    }

    SUBCASE("monotone decreasing in tau") {
        double prev = threshold_from_rule(0.001, 8.0, 1.0);
        for (double tau : {0.01, 0.05, 0.2, 0.4}) {
            const double t = threshold_from_rule(tau, 8.0, 1.0);
            CHECK(t < prev);
            prev = t;
        }
    }

    SUBCASE("precondition enforced") {
        CHECK_THROWS_AS(threshold_from_rule(0.5, 10.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(threshold_from_rule(0.4, std::log(10.0), 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("analytic error bound") {
    SUBCASE("T = 0 with all other terms zero") {
        CHECK(error_bound(0.0, 0.0, 0.0, 10.0, 1.0) == doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("wired to the declared formula") {
        const double T = 3.0, L = 10.0, c = 1.0;
        const double want = (1.0 - normal_cdf(T)) +
                            std::exp(-c * T * L) / (1.0 - normal_cdf(2 * T));
        CHECK(error_bound(0.0, 0.0, T, L, c) == doctest::Approx(want).epsilon(1e-12));
        CHECK(error_bound(0.0, 0.0, T, L, c) >= 1.0 - normal_cdf(T));
        CHECK(error_bound(0.0, 0.0, T, L, c) < 0.002);
    }

    SUBCASE("alpha and tau shift the bound additively") {
        const double base = error_bound(0.0, 0.0, 2.0, 8.0, 1.0);
        const double shifted = error_bound(0.03, 0.0, 2.0, 8.0, 1.0);
        CHECK(shifted == doctest::Approx(base + 0.03).epsilon(1e-9));
    }

    SUBCASE("precondition enforced") {
        CHECK_THROWS_AS(error_bound(0.0, 0.1, 3.0, 10.0, 1.0), std::invalid_argument);
    }
}
