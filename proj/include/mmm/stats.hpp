#pragma once

#include "mmm/common.hpp"

#include <cmath>

namespace mmm {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        double m2 = 2.0 * m;
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
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail probability of Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0) throw ValidationError("degrees of freedom must be positive");
    double x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

struct PairedTTest {
    double t = 0.0;
    double p = 1.0;
    double mean_diff = 0.0;
    double std_diff = 0.0;
    bool degenerate = false;  // zero-variance diffs; p forced to 1 or 0
};

// Paired two-sided t-test on a vector of per-repeat differences.
inline PairedTTest paired_t_test(const std::vector<double>& diffs) {
    if (diffs.size() < 2) throw ValidationError("paired t-test needs at least 2 repeats");
    PairedTTest r;
    auto n = static_cast<double>(diffs.size());
    r.mean_diff = mean_of(diffs);
    r.std_diff = sample_std(diffs);
    if (r.std_diff == 0.0) {
        r.degenerate = true;
        if (r.mean_diff == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::numeric_limits<double>::infinity() * (r.mean_diff > 0 ? 1.0 : -1.0);
            r.p = 0.0;
        }
        return r;
    }
    r.t = r.mean_diff / (r.std_diff / std::sqrt(n));
    r.p = student_t_two_sided_p(r.t, n - 1.0);
    return r;
}

}  // namespace mmm
