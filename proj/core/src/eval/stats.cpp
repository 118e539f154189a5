#include "qbe/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/core.h>

#include "qbe/error.hpp"

namespace qbe::eval {
namespace {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw PreconditionError(fmt::format("incomplete_beta needs a, b > 0 (got {}, {})", a, b));
    if (!(x >= 0.0 && x <= 1.0)) throw PreconditionError(fmt::format("incomplete_beta needs x in [0, 1], got {}", x));
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // The continued fraction converges fast only below the mean; use the
    // symmetry I_x(a, b) = 1 - I_{1-x}(b, a) above it.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, int df) {
    if (df < 1) throw PreconditionError(fmt::format("student_t_sf needs df >= 1, got {}", df));
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (t == 0.0) return 0.5;
    const double nu = df;
    // P(|T| > |t|) = I_{nu / (nu + t^2)}(nu / 2, 1 / 2)
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, x);
    return t > 0.0 ? tail : 1.0 - tail;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw PreconditionError(fmt::format("paired t-test needs equal lengths, got {} and {}", a.size(), b.size()));
    if (a.size() < 2) throw PreconditionError(fmt::format("paired t-test needs at least 2 pairs, got {}", a.size()));
    std::vector<double> d(a.size());
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    const double md = mean(d);
    const double sd = sample_sd(d);
    TTestResult r;
    r.degrees_of_freedom = static_cast<int>(d.size()) - 1;
    // Differences equal up to rounding of the inputs count as constant.
    const double tol = 1e-12 * std::max(1.0, scale);
    if (sd <= tol) {
        if (std::abs(md) <= tol) {
            r.t_value = 0.0;
            r.p_value_one_sided = 0.5;
            return r;
        }
        throw EvaluationError(
            fmt::format("paired t-test undefined: all {} differences equal {} (zero variance)", d.size(), md));
    }
    r.t_value = md / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p_value_one_sided = student_t_sf(r.t_value, r.degrees_of_freedom);
    return r;
}

}  // namespace qbe::eval
