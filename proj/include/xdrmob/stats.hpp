#pragma once

#include <cstddef>
#include <map>
#include <span>

#include "xdrmob/core.hpp"

namespace xdrmob::stats {

struct Correlation {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    double df() const noexcept { return static_cast<double>(n) - 2.0; }
};

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
    double p_value = 1.0;
};

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

/// Sample Pearson correlation with a two-sided p-value from the t transform
/// with n-2 degrees of freedom. Needs n >= 3 and non-zero variance in both.
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// Simple least squares y = slope * x + intercept; r2 is r squared.
RegressionFit ols(std::span<const double> x, std::span<const double> y);

/// Welch's unequal-variance two-sample t-test, two-sided.
TTest welch_t(std::span<const double> a, std::span<const double> b);

/// Share (percent) of total absolute value held by the top ceil(n/5) entries
/// ranked by income decile, ties broken by comuna id.
double quintile_share(const std::map<ComunaId, double>& values, const std::map<ComunaId, double>& deciles);

/// Ids of the top ceil(n/5) comunas by decile (ties by id), sorted by id.
std::vector<ComunaId> top_quintile(const std::map<ComunaId, double>& deciles);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

}  // namespace xdrmob::stats
