#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "xdrmob/stats.hpp"

namespace xdrmob::stats {
namespace {

using oracle::hp;

std::vector<double> normal_sample(std::mt19937_64& gen, std::size_t n, double mean, double sd)
{
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = dist(gen);
    }
    return v;
}

TEST(Pearson, PerfectLines)
{
    std::vector<double> x, y, z;
    for (int i = 0; i < 10; ++i) {
        x.push_back(i);
        y.push_back(2.0 * i);
        z.push_back(-i);
    }
    EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, z).r, -1.0, 1e-12);
    EXPECT_EQ(pearson(x, y).p_value, 0.0);
}

TEST(Pearson, ZeroVarianceIsDegenerate)
{
    const std::vector<double> x{1, 2, 3, 4}, y{5, 5, 5, 5};
    try {
        pearson(x, y);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DegenerateData);
    }
}

TEST(Pearson, TooFewPoints)
{
    const std::vector<double> x{1, 2}, y{2, 1};
    EXPECT_THROW(pearson(x, y), Error);
}

TEST(Pearson, MatchesHighPrecisionReference)
{
    std::mt19937_64 gen(50);
    std::uniform_int_distribution<std::size_t> size(3, 60);
    std::uniform_real_distribution<double> rho(-0.95, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = size(gen);
        auto x = normal_sample(gen, n, 5.0, 2.0);
        auto e = normal_sample(gen, n, 0.0, 1.0);
        const double r = rho(gen);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = r * x[i] + std::sqrt(1 - r * r) * 2.0 * e[i];
        }
        const auto got = pearson(x, y);
        const auto ref = oracle::hp_pearson(x, y);
        ASSERT_NEAR(got.r, static_cast<double>(ref.r), 1e-10);
        ASSERT_NEAR(got.p_value, static_cast<double>(ref.p), 1e-10);
        ASSERT_EQ(got.df(), static_cast<double>(n) - 2.0);
    }
}

TEST(Pearson, AffineInvarianceAndSignFlip)
{
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = normal_sample(gen, 30, 0.0, 1.0);
        auto y = normal_sample(gen, 30, 0.0, 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] += 0.5 * x[i];
        }
        const double r = pearson(x, y).r;
        std::vector<double> xa(x.size()), yn(y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xa[i] = 3.5 * x[i] + 100.0;
            yn[i] = -y[i];
        }
        ASSERT_NEAR(pearson(xa, y).r, r, 1e-12);
        ASSERT_NEAR(pearson(x, yn).r, -r, 1e-12);
    }
}

TEST(Ols, ExactLine)
{
    std::vector<double> x, y;
    for (int i = -5; i <= 5; ++i) {
        x.push_back(i);
        y.push_back(3.0 * i + 1.0);
    }
    const auto fit = ols(x, y);
    EXPECT_NEAR(fit.slope, 3.0, 1e-12);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-12);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
    EXPECT_EQ(fit.n, 11u);
}

TEST(Ols, ConstantResponseIsDegenerate)
{
    const std::vector<double> x{1, 2, 3}, y{4, 4, 4};
    EXPECT_THROW(ols(x, y), Error);
}

TEST(Ols, MatchesNormalEquationsAndOrthogonalResiduals)
{
    std::mt19937_64 gen(60);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial);
        auto x = normal_sample(gen, n, 4.0, 3.0);
        auto y = normal_sample(gen, n, 0.0, 2.0);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += 1.7 * x[i] - 2.0;
        }
        const auto fit = ols(x, y);
        const auto ref = oracle::hp_normal_equations(x, y);
        ASSERT_NEAR(fit.slope, static_cast<double>(ref.slope), 1e-10);
        ASSERT_NEAR(fit.intercept, static_cast<double>(ref.intercept), 1e-10);
        ASSERT_NEAR(fit.r2, fit.r * fit.r, 1e-12);
        ASSERT_NEAR(fit.r, pearson(x, y).r, 1e-15);
        double dot = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double res = y[i] - (fit.slope * x[i] + fit.intercept);
            dot += res * x[i];
            scale += std::abs(y[i] * x[i]);
        }
        ASSERT_LT(std::abs(dot), 1e-9 * scale);
    }
}

TEST(Welch, IdenticalSamples)
{
    const std::vector<double> a{1, 2, 3, 4};
    const auto t = welch_t(a, a);
    EXPECT_EQ(t.t, 0.0);
    EXPECT_NEAR(t.p_value, 1.0, 1e-15);
}

TEST(Welch, ConstantEqualSamples)
{
    const std::vector<double> a{2, 2, 2}, b{2, 2, 2, 2};
    const auto t = welch_t(a, b);
    EXPECT_EQ(t.t, 0.0);
    EXPECT_EQ(t.p_value, 1.0);
}

TEST(Welch, SeparatedSamples)
{
    const std::vector<double> a{0, 0, 0, 0}, b{10.0, 10.0 + 1e-3, 10.0 - 1e-3, 10.0 + 2e-3};
    EXPECT_LT(welch_t(a, b).p_value, 1e-6);
}

TEST(Welch, Antisymmetric)
{
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto a = normal_sample(gen, 7, 0.0, 1.0);
        const auto b = normal_sample(gen, 25, 0.5, 3.0);
        const auto ab = welch_t(a, b);
        const auto ba = welch_t(b, a);
        ASSERT_DOUBLE_EQ(ab.t, -ba.t);
        ASSERT_DOUBLE_EQ(ab.p_value, ba.p_value);
        ASSERT_DOUBLE_EQ(ab.df, ba.df);
    }
}

TEST(Welch, MatchesHighPrecisionReference)
{
    std::mt19937_64 gen(70);
    std::uniform_int_distribution<std::size_t> size(2, 40);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = normal_sample(gen, size(gen), 0.0, 1.0);
        const auto b = normal_sample(gen, size(gen), 0.8, 2.5);
        const auto got = welch_t(a, b);
        const auto ref = oracle::hp_welch(a, b);
        ASSERT_NEAR(got.t, static_cast<double>(ref.t), 1e-10 * std::max(1.0, std::abs(got.t)));
        ASSERT_NEAR(got.df, static_cast<double>(ref.df), 1e-9 * got.df);
        ASSERT_NEAR(got.p_value, static_cast<double>(ref.p), 1e-10);
    }
}

TEST(IncompleteBeta, FixedGridAgainstBoost)
{
    for (double a : {0.5, 1.0, 2.5, 5.0, 14.5, 40.0}) {
        for (double b : {0.5, 1.0, 3.0, 10.0}) {
            for (int k = 1; k < 100; ++k) {
                const double x = k / 100.0;
                const double ref = static_cast<double>(boost::math::ibeta(hp(a), hp(b), hp(x)));
                ASSERT_NEAR(incomplete_beta(a, b, x), ref, 1e-12) << a << " " << b << " " << x;
            }
        }
    }
    EXPECT_EQ(incomplete_beta(2.0, 3.0, 0.0), 0.0);
    EXPECT_EQ(incomplete_beta(2.0, 3.0, 1.0), 1.0);
}

TEST(StudentT, AgreesWithBoostDistribution)
{
    for (double df : {1.0, 2.0, 4.5, 10.0, 30.0, 200.0}) {
        const boost::math::students_t_distribution<double> dist(df);
        for (double t : {0.0, 0.3, 1.0, 1.96, 3.0, 8.0}) {
            const double ref = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
            ASSERT_NEAR(student_t_two_sided(t, df), ref, 1e-12);
            ASSERT_NEAR(student_t_two_sided(-t, df), ref, 1e-12);
        }
    }
}

TEST(QuintileShare, UniformValues)
{
    std::map<ComunaId, double> v, d;
    for (ComunaId c = 1; c <= 10; ++c) {
        v[c] = 4.0;
        d[c] = static_cast<double>(c);
    }
    EXPECT_NEAR(quintile_share(v, d), 20.0, 1e-12);
}

TEST(QuintileShare, AllMassOnRichest)
{
    std::map<ComunaId, double> v{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 9}};
    std::map<ComunaId, double> d{{1, 1}, {2, 3}, {3, 5}, {4, 7}, {5, 10}};
    EXPECT_NEAR(quintile_share(v, d), 100.0, 1e-12);
}

TEST(QuintileShare, ErrorsOnDegenerateInput)
{
    std::map<ComunaId, double> v{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
    std::map<ComunaId, double> d{{1, 1}, {2, 3}, {3, 5}, {4, 7}, {5, 10}};
    EXPECT_THROW(quintile_share(v, d), Error);
    v.erase(5);
    v[4] = 1.0;
    EXPECT_THROW(quintile_share(v, d), Error);
}

TEST(QuintileShare, RandomMatchesSortAndSum)
{
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<int> size(5, 60);
    std::uniform_int_distribution<int> decile(1, 10);
    std::normal_distribution<double> value(10.0, 15.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(gen);
        std::map<ComunaId, double> v, d;
        std::vector<std::tuple<double, ComunaId, double>> rows;
        for (int i = 0; i < n; ++i) {
            const ComunaId id = 13101 + static_cast<ComunaId>(i) * 3;
            v[id] = value(gen);
            d[id] = decile(gen);
            rows.emplace_back(d[id], id, v[id]);
        }
        std::sort(rows.begin(), rows.end());
        const std::size_t k = (static_cast<std::size_t>(n) + 4) / 5;
        double top = 0, total = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            total += std::abs(std::get<2>(rows[i]));
            if (i >= rows.size() - k) {
                top += std::abs(std::get<2>(rows[i]));
            }
        }
        ASSERT_NEAR(quintile_share(v, d), 100.0 * top / total, 1e-9);
        ASSERT_EQ(top_quintile(d).size(), k);
    }
}

}  // namespace
}  // namespace xdrmob::stats
