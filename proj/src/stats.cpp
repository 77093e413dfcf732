#include "promptcare/stats.hpp"

#include <cmath>
#include <limits>

#include "promptcare/errors.hpp"

namespace promptcare {

namespace {

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz scheme. Converges quickly when x < (a+1)/(a+b+2).
double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double dm = static_cast<double>(m);
        // Even step.
        double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) return h;
    }
    return h;  // converged to working precision long before 300 terms in practice
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("incomplete beta: a, b must be positive");
    if (!(x >= 0.0) || !(x <= 1.0)) throw ConfigError("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                            (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(ln_front) * beta_cf(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw ConfigError("t distribution: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TestResult welch_two_sample(const std::vector<double>& p1, const std::vector<double>& p2) {
    if (p1.size() != p2.size()) throw ConfigError("two-sample test: sample sizes differ");
    if (p1.size() < 2) throw ConfigError("two-sample test: need at least 2 observations");
    const double n = static_cast<double>(p1.size());

    auto mean_var = [n](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, var / (n - 1.0)};
    };
    const auto [m1, v1] = mean_var(p1);
    const auto [m2, v2] = mean_var(p2);

    TestResult r;
    if (v1 == 0.0 && v2 == 0.0) {
        // Both samples constant: identical constants are a perfect match,
        // different constants a perfect separation.
        if (m1 == m2) return {0.0, 0.0, 1.0};
        const double inf = std::numeric_limits<double>::infinity();
        return {m1 > m2 ? inf : -inf, 0.0, 0.0};
    }
    const double se1 = v1 / n, se2 = v2 / n;
    r.t = (m1 - m2) / std::sqrt(se1 + se2);
    r.df = (se1 + se2) * (se1 + se2) /
           (se1 * se1 / (n - 1.0) + se2 * se2 / (n - 1.0));
    r.p = student_t_two_sided(r.t, r.df);
    return r;
}

}  // namespace promptcare
