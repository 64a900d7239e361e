#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hapticforge/error.hpp"
#include "hapticforge/stats.hpp"

namespace hapticforge {

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw Error("NumericFailure", "incomplete beta continued fraction did not converge");
}

// y = 1 - x, supplied separately so callers can avoid the subtraction.
double incomplete_beta_xy(double a, double b, double x, double y) {
    if (x == 0.0) return 0.0;
    if (y == 0.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, y) / b;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
        throw Error("DomainError", "incomplete_beta requires a, b > 0 and x in [0, 1]");
    }
    return incomplete_beta_xy(a, b, x, 1.0 - x);
}

namespace {

// P(|T| > |t|) / 2
double half_tail(double t, double df) {
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    return 0.5 * incomplete_beta_xy(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2));
}

} // namespace

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw Error("DomainError", "degrees of freedom must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    const double tail = half_tail(t, df);
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_sf(double t, double df) {
    if (!(df > 0.0)) throw Error("DomainError", "degrees of freedom must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    const double tail = half_tail(t, df);
    return t > 0.0 ? tail : 1.0 - tail;
}

std::string_view to_string(Alternative alt) {
    switch (alt) {
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
    case Alternative::TwoSided: return "two-sided";
    }
    return "?";
}

TTestResult one_sample_t(std::span<const double> sample, double mu0, Alternative alt) {
    const std::size_t n = sample.size();
    if (n < 2) throw Error("DegenerateSample", "need at least two observations");
    const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(n);
    if (std::all_of(sample.begin(), sample.end(), [&](double v) { return v == sample[0]; })) {
        throw Error("DegenerateSample", "sample has zero variance");
    }
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    r.n = n;
    r.df = static_cast<double>(n - 1);
    r.mean = mean;
    r.sd = sd;
    r.mu0 = mu0;
    r.alternative = alt;
    r.t = (mean - mu0) / (sd / std::sqrt(static_cast<double>(n)));
    switch (alt) {
    case Alternative::Greater: r.p = student_t_sf(r.t, r.df); break;
    case Alternative::Less: r.p = student_t_cdf(r.t, r.df); break;
    case Alternative::TwoSided: r.p = std::min(1.0, 2.0 * half_tail(r.t, r.df)); break;
    }
    return r;
}

} // namespace hapticforge
