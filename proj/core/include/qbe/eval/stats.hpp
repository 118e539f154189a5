#pragma once

#include <span>

namespace qbe::eval {

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Upper-tail probability P(T > t) of Student's t with `df` degrees of freedom.
double student_t_sf(double t, int df);

struct TTestResult {
    double t_value = 0.0;
    int degrees_of_freedom = 0;
    double p_value_one_sided = 0.5;
};

/// One-sided paired t-test of H1: mean(a - b) > 0.
/// Throws PreconditionError on length mismatch or fewer than two pairs, and
/// EvaluationError when all differences are equal but nonzero.
TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
/// Sample (n - 1) standard deviation; 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

}  // namespace qbe::eval
