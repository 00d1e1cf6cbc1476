#include "xdrmob/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace xdrmob::stats {

namespace {

struct Moments {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
};

double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

// Two-pass centered sums.
Moments moments(std::span<const double> x, std::span<const double> y)
{
    Moments m;
    m.mean_x = mean(x);
    m.mean_y = mean(y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - m.mean_x;
        const double dy = y[i] - m.mean_y;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

void require_pairs(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw Error(Errc::ValidationError, "paired samples differ in length");
    }
    if (x.size() < 3) {
        throw Error(Errc::InsufficientData, "at least 3 pairs are required, got " + std::to_string(x.size()));
    }
}

double correlation_p(double r, std::size_t n)
{
    const double df = static_cast<double>(n) - 2.0;
    if (std::abs(r) >= 1.0) {
        return 0.0;
    }
    const double t = r * std::sqrt(df / ((1.0 - r) * (1.0 + r)));
    return student_t_two_sided(t, df);
}

double sample_variance(std::span<const double> v, double m)
{
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

// Continued fraction for I_x(a,b), modified Lentz.
double beta_continued_fraction(double a, double b, double x)
{
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw Error(Errc::ValidationError, "incomplete beta needs positive shape parameters");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df)
{
    if (std::isnan(t)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    const double x = df / (df + t * t);
    return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

Correlation pearson(std::span<const double> x, std::span<const double> y)
{
    require_pairs(x, y);
    const Moments m = moments(x, y);
    if (m.sxx == 0.0 || m.syy == 0.0) {
        throw Error(Errc::DegenerateData, "zero variance in a correlation argument");
    }
    Correlation c;
    c.n = x.size();
    c.r = std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
    c.p_value = correlation_p(c.r, c.n);
    return c;
}

RegressionFit ols(std::span<const double> x, std::span<const double> y)
{
    require_pairs(x, y);
    const Moments m = moments(x, y);
    if (m.sxx == 0.0 || m.syy == 0.0) {
        throw Error(Errc::DegenerateData, "zero variance in a regression argument");
    }
    RegressionFit fit;
    fit.n = x.size();
    fit.slope = m.sxy / m.sxx;
    fit.intercept = m.mean_y - fit.slope * m.mean_x;
    fit.r = std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
    fit.r2 = fit.r * fit.r;
    fit.p_value = correlation_p(fit.r, fit.n);
    return fit;
}

TTest welch_t(std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 2 || b.size() < 2) {
        throw Error(Errc::InsufficientData, "welch_t needs at least two observations per sample");
    }
    const double ma = mean(a);
    const double mb = mean(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a, ma) / na;
    const double vb = sample_variance(b, mb) / nb;
    const double se2 = va + vb;
    TTest out;
    if (se2 == 0.0) {
        if (ma == mb) {
            out.t = 0.0;
            out.df = na + nb - 2.0;
            out.p_value = 1.0;
        } else {
            out.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            out.df = na + nb - 2.0;
            out.p_value = 0.0;
        }
        return out;
    }
    out.t = (ma - mb) / std::sqrt(se2);
    out.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    out.p_value = student_t_two_sided(out.t, out.df);
    return out;
}

std::vector<ComunaId> top_quintile(const std::map<ComunaId, double>& deciles)
{
    std::vector<std::pair<double, ComunaId>> ranked;
    ranked.reserve(deciles.size());
    for (const auto& [id, d] : deciles) {
        ranked.emplace_back(d, id);
    }
    std::sort(ranked.begin(), ranked.end());
    const std::size_t k = (ranked.size() + 4) / 5;
    std::vector<ComunaId> top;
    for (std::size_t i = ranked.size() - k; i < ranked.size(); ++i) {
        top.push_back(ranked[i].second);
    }
    std::sort(top.begin(), top.end());
    return top;
}

double quintile_share(const std::map<ComunaId, double>& values, const std::map<ComunaId, double>& deciles)
{
    std::map<ComunaId, double> ranked_deciles;
    for (const auto& [id, v] : values) {
        auto it = deciles.find(id);
        if (it == deciles.end()) {
            throw Error(Errc::ValidationError, "no income decile for comuna " + std::to_string(id));
        }
        ranked_deciles.emplace(id, it->second);
    }
    if (ranked_deciles.size() < 5) {
        throw Error(Errc::InsufficientData, "quintile share needs at least 5 comunas");
    }
    double total = 0.0;
    for (const auto& [id, v] : values) {
        total += std::abs(v);
    }
    if (total == 0.0) {
        throw Error(Errc::DegenerateData, "all values are zero");
    }
    double top = 0.0;
    for (ComunaId id : top_quintile(ranked_deciles)) {
        top += std::abs(values.at(id));
    }
    return 100.0 * top / total;
}

}  // namespace xdrmob::stats
