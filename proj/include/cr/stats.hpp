#pragma once

#include <string>
#include <vector>

namespace cr {
namespace stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::string test_name;
};

// Regularized incomplete beta I_x(a, b) via the continued-fraction expansion
// (modified Lentz), accurate to ~1e-14.
double incomplete_beta(double a, double b, double x);

// Two-sided tail P(|T| > |t|) for Student-t with df degrees of freedom.
double student_t_two_sided(double t, double df);

// Paired two-sided t-test; throws on zero-variance differences.
TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Wilcoxon signed-rank, zero differences dropped. Exact distribution via DP
// over (doubled, tie-averaged) rank sums for n <= 25, normal approximation
// with tie correction above.
TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// Exact two-sided binomial sign test (p0 = 1/2), ties dropped.
TestResult sign_test(const std::vector<double>& a, const std::vector<double>& b);

// Welch two-sample t-test with Welch-Satterthwaite degrees of freedom.
TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// alpha / m.
double bonferroni_alpha(double alpha, std::size_t m);

}  // namespace stats
}  // namespace cr
