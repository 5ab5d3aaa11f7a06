#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eimlab/rng.hpp"
#include "eimlab/theory.hpp"

using namespace eimlab;

TEST_CASE("tau threshold") {
    CHECK(tau_threshold(1.0, 4) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(tau_threshold(2.0, 4) == doctest::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::abs(tau_threshold(1.0, 1000000) - 2.0) < 1e-5);
    CHECK_THROWS(tau_threshold(1.0, 2));
    CHECK_THROWS(tau_threshold(0.0, 4));
}

TEST_CASE("extended directions are exactly orthogonal") {
    SUBCASE("hand-built directions") {
        Eigen::VectorXd n1(2), n2(2);
        n1 << 1, 0;
        n2 << 0.6, 0.8;
        const Prop2Report rep = prop2_check({n1, n2});
        CHECK(rep.max_cross_inner == 0.0);
        CHECK(rep.max_norm_error < 1e-12);
    }

    SUBCASE("random unit vectors across the grid") {
        RngStream rng = derive_stream(61, 0);
        for (const int m : {2, 8, 64})
            for (const int d : {4, 32, 128}) {
                std::vector<Eigen::VectorXd> dirs;
                for (int i = 0; i < m; ++i) {
                    Eigen::VectorXd v = rng.normal_matrix(d, 1);
                    dirs.push_back(v / v.norm());
                }
                const Prop2Report rep = prop2_check(dirs);
                CHECK(rep.max_cross_inner == 0.0);
                CHECK(rep.max_norm_error < 1e-12);
            }
    }

    SUBCASE("non-unit input rejected") {
        Eigen::VectorXd big(2);
        big << 3, 4;
        CHECK_THROWS(prop2_check({big}));
    }
}

TEST_CASE("manipulation success probability monte carlo") {
    SUBCASE("analytic spot values") {
        const Prop1Report a = prop1_mc(1, 4, 1.0, 0.1, 1000000, 99, 4);
        CHECK(a.tau == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
        CHECK(a.analytic == doctest::Approx(std::erf(2.0)).epsilon(1e-12));
        CHECK(std::abs(a.estimate - a.analytic) < 3.0 * a.std_error);

        const Prop1Report b = prop1_mc(2, 4, 1.0, 0.1, 1000000, 99, 4);
        CHECK(b.analytic == doctest::Approx(std::erf(std::sqrt(2.0))).epsilon(1e-12));
        CHECK(std::abs(b.estimate - b.analytic) < 3.0 * b.std_error);
    }

    SUBCASE("four standard errors across the grid") {
        for (const int m : {1, 2, 4})
            for (const int d : {4, 16, 64})
                for (const double alpha : {1.0, 2.0}) {
                    const Prop1Report rep = prop1_mc(m, d, alpha, 0.1, 100000, 7, 2);
                    // absolute slack for near-saturated cells where every
                    // sample succeeds and the empirical std error collapses
                    CHECK(std::abs(rep.estimate - rep.analytic) <
                          4.0 * rep.std_error + 1e-7);
                }
    }

    SUBCASE("job count does not change the estimate") {
        const Prop1Report one = prop1_mc(2, 16, 1.0, 0.5, 200000, 123, 1);
        const Prop1Report four = prop1_mc(2, 16, 1.0, 0.5, 200000, 123, 4);
        CHECK(one.estimate == four.estimate);
    }

    SUBCASE("claimed bound decreases with m") {
        double prev = 2.0;
        for (const int m : {1, 2, 4, 8}) {
            const Prop1Report rep = prop1_mc(m, 16, 1.5, 0.5, 10000, 3, 1);
            CHECK(rep.claimed_bound < prev);
            CHECK(rep.claimed_bound > 0.0);
            prev = rep.claimed_bound;
        }
    }

    SUBCASE("parameter domain") {
        CHECK_THROWS(prop1_mc(0, 4, 1.0, 0.1, 10000, 1));
        CHECK_THROWS(prop1_mc(1, 3, 1.0, 0.1, 10000, 1));
        CHECK_THROWS(prop1_mc(1, 4, 0.5, 0.1, 10000, 1));
        CHECK_THROWS(prop1_mc(1, 4, 1.0, 0.1, 100, 1));
        CHECK_THROWS(prop1_mc(1, 4, 1.0, -0.1, 10000, 1));
    }
}
