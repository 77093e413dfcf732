#pragma once

#include <vector>

namespace promptcare {

struct TestResult {
    double t = 0.0;   // sign follows mean(p1) - mean(p2); +-inf when both samples are constant
    double df = 0.0;  // Welch-Satterthwaite degrees of freedom (0 in the degenerate cases)
    double p = 1.0;   // two-sided p-value
};

// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0, 1].
// Continued-fraction evaluation (modified Lentz), accurate to ~1e-14.
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T_df| >= |t|) of Student's t distribution.
double student_t_two_sided(double t, double df);

// Welch's unequal-variance two-sample t-test, two-sided. The samples must
// have the same size, at least 2. When both samples are constant the test is
// degenerate: p = 1 if the constants agree, else p = 0.
TestResult welch_two_sample(const std::vector<double>& p1, const std::vector<double>& p2);

}  // namespace promptcare
