#pragma once

#include <span>
#include <string_view>

namespace hapticforge {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` > 0 degrees of freedom.
double student_t_cdf(double t, double df);
/// P(T > t), computed without cancellation for large t.
double student_t_sf(double t, double df);

enum class Alternative { Greater, Less, TwoSided };

std::string_view to_string(Alternative alt);

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    Alternative alternative = Alternative::Greater;
    double mu0 = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    /// Zero variance; t is infinite or undefined and p is 0 or 1.
    bool degenerate = false;
};

/// One-sample t test of mean(sample) against mu0, sample sd with n-1.
/// Throws Error("DegenerateSample") when n < 2 or the sample has zero variance.
TTestResult one_sample_t(std::span<const double> sample, double mu0, Alternative alt);

} // namespace hapticforge
