#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "xdrmob/core.hpp"
#include "xdrmob/transport.hpp"

namespace xdrmob {
namespace {

std::vector<double> random_mass(std::mt19937_64& gen, std::size_t n, double total, double zero_prob)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = u(gen) < zero_prob ? 0.0 : u(gen);
        s += x;
    }
    if (s == 0.0) {
        v[0] = 1.0;
        s = 1.0;
    }
    for (auto& x : v) {
        x *= total / s;
    }
    return v;
}

std::vector<double> geo_metric(std::mt19937_64& gen, std::size_t n)
{
    std::uniform_real_distribution<double> lat(-45.0, -18.0);
    std::uniform_real_distribution<double> lon(-74.0, -68.0);
    std::vector<std::pair<double, double>> pts(n);
    for (auto& p : pts) {
        p = {lat(gen), lon(gen)};
    }
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d[i * n + j] = haversine_km(pts[i].first, pts[i].second, pts[j].first, pts[j].second);
        }
    }
    return d;
}

TEST(SolveTransport, TwoByTwoByHand)
{
    const std::vector<double> s{3, 2}, dm{1, 4}, c{1, 5, 2, 3};
    // ship 1 via (0,0), 2 via (0,1), 2 via (1,1): 1 + 10 + 6 = 17
    const auto plan = solve_transport(s, dm, c);
    EXPECT_DOUBLE_EQ(plan.cost, 17.0);
    ASSERT_EQ(plan.flow.size(), 4u);
    EXPECT_DOUBLE_EQ(plan.flow[0] + plan.flow[1], 3.0);
    EXPECT_DOUBLE_EQ(plan.flow[1] + plan.flow[3], 4.0);
}

TEST(SolveTransport, RejectsUnbalanced)
{
    const std::vector<double> s{1, 2}, dm{1, 1}, c{0, 0, 0, 0};
    EXPECT_THROW(solve_transport(s, dm, c), Error);
}

TEST(SolveTransport, RandomInstancesMatchBasisEnumeration)
{
    std::mt19937_64 gen(17);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    std::uniform_real_distribution<double> cost(0.0, 100.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t m = dim(gen), n = dim(gen);
        const double total = 10.0;
        const auto s = random_mass(gen, m, total, 0.2);
        const auto d = random_mass(gen, n, total, 0.2);
        std::vector<double> c(m * n);
        for (auto& x : c) {
            x = cost(gen);
        }
        const auto plan = solve_transport(s, d, c);
        const double ref = oracle::brute_transport(s, d, c);
        ASSERT_NEAR(plan.cost, ref, 1e-9) << "trial " << trial;
        // the plan itself is feasible and priced consistently
        double priced = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                ASSERT_GE(plan.flow[i * n + j], -1e-12);
                row += plan.flow[i * n + j];
                priced += plan.flow[i * n + j] * c[i * n + j];
            }
            ASSERT_NEAR(row, s[i], 1e-9);
        }
        for (std::size_t j = 0; j < n; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                col += plan.flow[i * n + j];
            }
            ASSERT_NEAR(col, d[j], 1e-9);
        }
        ASSERT_NEAR(priced, plan.cost, 1e-9);
    }
}

TEST(SolveTransport, DegenerateIntegerInstances)
{
    // equal partial sums force degenerate bases
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> units(0, 3);
    std::uniform_int_distribution<int> cost(0, 9);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s(4), d(4);
        double ts = 0, td = 0;
        for (auto& x : s) {
            ts += x = units(gen);
        }
        for (auto& x : d) {
            td += x = units(gen);
        }
        if (ts == 0 || ts != td) {
            continue;
        }
        std::vector<double> c(16);
        for (auto& x : c) {
            x = cost(gen);
        }
        ASSERT_NEAR(solve_transport(s, d, c).cost, oracle::brute_transport(s, d, c), 1e-9);
    }
}

TEST(Wasserstein1, IdenticalIsExactlyZero)
{
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 6;
        const auto p = random_mass(gen, n, 1.0, 0.3);
        const auto d = geo_metric(gen, n);
        EXPECT_EQ(wasserstein1(p, p, d), 0.0);
    }
}

TEST(Wasserstein1, TwoPointMasses)
{
    const std::vector<double> d{0.0, 123.456, 123.456, 0.0};
    const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
    EXPECT_DOUBLE_EQ(wasserstein1(p, q, d), 123.456);
}

TEST(Wasserstein1, SymmetricAndMatchesDualEnumeration)
{
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<std::size_t> dim(2, 6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = dim(gen);
        const auto p = random_mass(gen, n, 1.0, 0.25);
        const auto q = random_mass(gen, n, 1.0, 0.25);
        const auto d = geo_metric(gen, n);
        const double w = wasserstein1(p, q, d);
        ASSERT_NEAR(w, oracle::kr_dual_w1(p, q, d), 1e-9) << "trial " << trial;
        ASSERT_NEAR(w, wasserstein1(q, p, d), 1e-9);
        ASSERT_GE(w, 0.0);
    }
}

TEST(Wasserstein1, PrimalOracleAgreesOnFullCostMatrix)
{
    // no cancellation on the oracle side: all n x n cells are candidates
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + trial % 3;
        const auto p = random_mass(gen, n, 1.0, 0.0);
        const auto q = random_mass(gen, n, 1.0, 0.0);
        const auto d = geo_metric(gen, n);
        ASSERT_NEAR(wasserstein1(p, q, d), oracle::brute_transport(p, q, d), 1e-9);
    }
}

TEST(Wasserstein1, MassMismatchRejected)
{
    const std::vector<double> d{0, 1, 1, 0};
    const std::vector<double> p{1.0, 0.0}, q{0.0, 0.5};
    EXPECT_THROW(wasserstein1(p, q, d), Error);
}

}  // namespace
}  // namespace xdrmob
