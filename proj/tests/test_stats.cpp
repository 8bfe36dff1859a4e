#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "divfuse/common.hpp"
#include "divfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace divfuse;

TEST_CASE("tie-free hand case x=[1,2] y=[3,4]") {
    const MwuResult r = mann_whitney_u({1, 2}, {3, 4});
    CHECK(r.u1 == 0.0);
    CHECK(r.u2 == 4.0);
    CHECK(r.u == 0.0);
    // mu = 2, sigma = sqrt(4/12 * 5), |U1 - mu| - 0.5 = 1.5
    const double sigma = std::sqrt(5.0 / 3.0);
    CHECK(r.z == doctest::Approx(-1.5 / sigma).epsilon(1e-14));
    CHECK(r.p == doctest::Approx(std::erfc(1.5 / sigma / std::sqrt(2.0))).epsilon(1e-14));
}

TEST_CASE("separated samples and the exact oracle") {
    const std::vector<double> x = {1, 2, 3};
    const std::vector<double> y = {4, 5, 6};
    const MwuResult r = mann_whitney_u(x, y);
    CHECK(r.u1 == 0.0);
    CHECK(r.u == 0.0);
    // Exact enumeration: only {1,2,3} of the C(6,3)=20 subsets has U1 <= 0.
    CHECK(exact_mwu_p(x, y) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("identical multisets are degenerate-symmetric") {
    const std::vector<double> x = {3, 1, 2};
    const std::vector<double> y = {1, 2, 3};
    const MwuResult r = mann_whitney_u(x, y);
    CHECK(r.u == doctest::Approx(4.5));  // n1*n2/2
    CHECK(r.p == doctest::Approx(1.0));

    // All pooled values equal: explicitly degenerate.
    const MwuResult d = mann_whitney_u({5, 5}, {5, 5, 5});
    CHECK(d.u == 3.0);
    CHECK(d.z == 0.0);
    CHECK(d.p == 1.0);
    CHECK(exact_mwu_p({5, 5}, {5, 5, 5}) == 1.0);
}

TEST_CASE("tie-heavy hand case x=[1,1,2] y=[1,2,2]") {
    const MwuResult r = mann_whitney_u({1, 1, 2}, {1, 2, 2});
    // midranks: the three 1s get 2, the three 2s get 5 -> R1 = 9, U1 = 3.
    CHECK(r.u1 == 3.0);
    CHECK(r.u2 == 6.0);
    CHECK(r.u == 3.0);
    // tie term = 2*(27-3) = 48; sigma^2 = 9/12 * (7 - 48/30) = 4.05
    CHECK(r.z == doctest::Approx(-1.0 / std::sqrt(4.05)).epsilon(1e-14));
    CHECK(r.p == doctest::Approx(std::erfc(1.0 / std::sqrt(4.05) / std::sqrt(2.0))).epsilon(1e-14));

    // Exhaustive 20-assignment oracle: U1 per composition (#ones in group 1)
    // is 0/3/6/9 with weights 1/9/9/1, so P(U1 <= 3) = 10/20 and the doubled
    // two-sided p is exactly 1. With only two distinct levels half the mass
    // sits on the observed statistic, so the normal approximation is expected
    // to sit well below the exact value here.
    CHECK(exact_mwu_p({1, 1, 2}, {1, 2, 2}) == 1.0);
}

TEST_CASE("exact oracle smallest cases") {
    CHECK(exact_mwu_p({1}, {2}) == 1.0);
    CHECK(exact_mwu_p({2}, {1}) == 1.0);
    CHECK_THROWS_AS(exact_mwu_p(std::vector<double>(7, 0.0), std::vector<double>(6, 1.0)),
                    ConfigError);
}

TEST_CASE("U1 + U2 = n1*n2 with and without ties") {
    Rng rng(3);
    for (int it = 0; it < 40; ++it) {
        const int n1 = static_cast<int>(rng.uniform_int(1, 10));
        const int n2 = static_cast<int>(rng.uniform_int(1, 10));
        std::vector<double> x, y;
        for (int i = 0; i < n1; ++i) x.push_back(rng.uniform_int(0, 4));  // heavy ties
        for (int i = 0; i < n2; ++i) y.push_back(rng.uniform_int(0, 4));
        const MwuResult r = mann_whitney_u(x, y);
        CHECK(r.u1 + r.u2 == doctest::Approx(static_cast<double>(n1) * n2).epsilon(1e-12));
        CHECK(r.u >= 0.0);
        CHECK(r.u <= static_cast<double>(n1) * n2);
        CHECK(r.p >= 0.0);
        CHECK(r.p <= 1.0);
    }
}

TEST_CASE("swap symmetry and monotone-transform invariance") {
    Rng rng(9);
    for (int it = 0; it < 25; ++it) {
        std::vector<double> x, y;
        const int n1 = static_cast<int>(rng.uniform_int(2, 8));
        const int n2 = static_cast<int>(rng.uniform_int(2, 8));
        for (int i = 0; i < n1; ++i) x.push_back(rng.uniform(-2.0, 2.0));
        for (int i = 0; i < n2; ++i) y.push_back(rng.uniform(-2.0, 2.0));

        const MwuResult base = mann_whitney_u(x, y);
        const MwuResult swapped = mann_whitney_u(y, x);
        CHECK(swapped.u == base.u);
        CHECK(swapped.p == base.p);
        CHECK(swapped.z == doctest::Approx(-base.z).epsilon(1e-14));

        // Rank statistics see only the order, so exp() changes nothing at all.
        std::vector<double> xe, ye;
        for (double v : x) xe.push_back(std::exp(v));
        for (double v : y) ye.push_back(std::exp(v));
        const MwuResult mono = mann_whitney_u(xe, ye);
        CHECK(mono.u1 == base.u1);
        CHECK(mono.u == base.u);
        CHECK(mono.z == base.z);
        CHECK(mono.p == base.p);
    }
}

TEST_CASE("normal approximation tracks the exact oracle at n=6") {
    Rng rng(77);
    for (int it = 0; it < 60; ++it) {
        std::vector<double> x, y;
        for (int i = 0; i < 6; ++i) x.push_back(rng.uniform(0.0, 1.0));
        for (int i = 0; i < 6; ++i) y.push_back(rng.uniform(0.0, 1.0) + rng.uniform(0.0, 0.4));
        const MwuResult approx = mann_whitney_u(x, y);
        const double exact = exact_mwu_p(x, y);
        CHECK(std::abs(approx.p - exact) < 0.05);
    }
}

TEST_CASE("rank_biserial arithmetic") {
    CHECK(rank_biserial(0.0, 100) == 0.0);
    // Table-1-scale consistency: |Z| ~ 6.258 at N = 1132 gives |r| ~ 0.186.
    CHECK(rank_biserial(6.258, 1132) == doctest::Approx(0.186).epsilon(1e-3));
    CHECK(rank_biserial(-6.258, 1132) == rank_biserial(6.258, 1132));
    CHECK(rank_biserial(2.0, 100) > rank_biserial(1.0, 100));
    CHECK_THROWS_AS(rank_biserial(1.0, 1), ValidationError);
}

TEST_CASE("bonferroni thresholding") {
    CHECK(bonferroni({0.03}, 0.05) == std::vector<char>{1});
    CHECK(bonferroni({0.06}, 0.05) == std::vector<char>{0});

    std::vector<double> ps(100, 0.5);
    ps[7] = 0.0004;  // < 0.05/100
    ps[8] = 0.01;    // not significant after correction
    const auto flags = bonferroni(ps, 0.05);
    CHECK(flags[7] == 1);
    CHECK(flags[8] == 0);
    CHECK(std::count(flags.begin(), flags.end(), 1) == 1);
}

namespace {

// 20-AU dataset whose only label difference is the temporal spread of one
// channel. Negative samples are quiet on that channel apart from two large
// opposing spikes (wide range, small std); positive samples carry sustained
// uniform noise (large std) whose range overlaps the negatives'. Every other
// channel is label-independent, so the planted channel's std row is the one
// real effect and no other statistic separates cleanly.
Dataset planted_dataset(std::uint64_t seed, int n_per_class, int planted_au) {
    Rng rng(seed);
    Dataset ds;
    for (int i = 0; i < 2 * n_per_class; ++i) {
        VideoSample s;
        s.id = "p" + std::to_string(i);
        s.label = i % 2;
        s.split = Split::train;
        const int t = 40;
        s.visual.resize(t, 20);
        for (int f = 0; f < t; ++f) {
            for (int c = 0; c < 20; ++c) {
                s.visual(f, c) = std::max(0.0, 2.0 + 0.25 * rng.normal());
            }
        }
        if (s.label == 1) {
            for (int f = 0; f < t; ++f) {
                s.visual(f, planted_au) = 2.0 + rng.uniform(-1.2, 1.2);
            }
        } else {
            for (int f = 0; f < t; ++f) {
                s.visual(f, planted_au) = 2.0 + 0.1 * rng.normal();
            }
            const double spike = rng.uniform(0.75, 1.55);
            const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
            s.visual(10, planted_au) += sign * spike;
            s.visual(29, planted_au) -= sign * spike;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

TEST_CASE("rank_features finds a planted spread shift and formats the report") {
    const Dataset ds = planted_dataset(1001, 40, /*planted_au=*/4);
    const auto results = rank_features(ds);
    REQUIRE(results.size() == 100);
    CHECK(results[0].feature == "AU06 (cheek raiser)");
    CHECK(results[0].metric == "std");
    CHECK(results[0].significant);
    CHECK(results[0].mean_pos > results[0].mean_neg);
    CHECK(results[0].r >= results[1].r);

    const std::string csv = stat_report_csv(results);
    CHECK(csv.rfind("feature,metric,mean_pos,mean_neg,U,Z,p,r,significant\n", 0) == 0);
    CHECK(csv.find("AU06 (cheek raiser),std,") != std::string::npos);
}

TEST_CASE("rank_features requires both classes") {
    Dataset ds = planted_dataset(5, 3, 0);
    for (auto& s : ds.samples) s.label = 0;
    CHECK_THROWS_AS(rank_features(ds), ConfigError);
}
