#include "doctest.h"

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cr/rng.hpp"
#include "cr/stats.hpp"

using namespace cr::stats;

namespace {

// Enumeration oracle for the exact Wilcoxon two-sided p: flip every sign
// combination of the tie-averaged ranks and count |W+ - E| >= |w+ - E|
// style two-sided mass the same way the implementation defines it, i.e.
// p = P(W+ <= min(w+, w-)) + P(W+ >= max(w+, w-)).
double wilcoxon_enum_p(const std::vector<double>& diffs) {
    std::vector<double> mags;
    for (double d : diffs)
        if (d != 0.0) mags.push_back(std::abs(d));
    const std::size_t n = mags.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && mags[order[j]] == mags[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        i = j;
    }
    double w_plus = 0.0, total = 0.0;
    std::size_t idx = 0;
    for (double d : diffs) {
        if (d == 0.0) continue;
        if (d > 0.0) w_plus += rank[idx];
        total += rank[idx];
        ++idx;
    }
    const double w_minus = total - w_plus;
    const double lo = std::min(w_plus, w_minus), hi = std::max(w_plus, w_minus);
    std::size_t count = 0;
    const std::size_t combos = std::size_t(1) << n;
    for (std::size_t mask = 0; mask < combos; ++mask) {
        double w = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (mask & (std::size_t(1) << k)) w += rank[k];
        if (w <= lo + 1e-12 || w >= hi - 1e-12) ++count;
    }
    return std::min(1.0, static_cast<double>(count) / static_cast<double>(combos));
}

}  // namespace

TEST_CASE("incomplete beta: closed forms and frozen references") {
    CHECK(incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-13));
    CHECK(incomplete_beta(2.0, 1.0, 0.5) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(incomplete_beta(2.0, 3.0, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
    CHECK(incomplete_beta(0.5, 0.5, 0.3) ==
          doctest::Approx(0.36901011956554536).epsilon(1e-12));
    CHECK(incomplete_beta(3.0, 2.0, 0.0) == 0.0);
    CHECK(incomplete_beta(3.0, 2.0, 1.0) == 1.0);
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
    CHECK(incomplete_beta(2.5, 4.0, 0.3) ==
          doctest::Approx(1.0 - incomplete_beta(4.0, 2.5, 0.7)).epsilon(1e-12));
}

TEST_CASE("student t two-sided tail against frozen references") {
    CHECK(student_t_two_sided(2.5, 7.0) ==
          doctest::Approx(0.040992218585752874).epsilon(1e-10));
    CHECK(student_t_two_sided(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(student_t_two_sided(0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(student_t_two_sided(-2.5, 7.0) ==
          doctest::Approx(student_t_two_sided(2.5, 7.0)).epsilon(1e-12));
}

TEST_CASE("paired t-test matches the high-precision oracle to 6 significant digits") {
    const std::vector<double> a = {2.1, 1.9, 2.5, 2.3, 2.0, 2.2, 1.8, 2.4};
    const std::vector<double> b = {1.8, 2.0, 2.2, 1.9, 1.7, 2.1, 1.6, 2.0};
    const TestResult r = paired_t_test(a, b);
    CHECK(r.statistic == doctest::Approx(3.986612818045701).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(0.005279182955930997).epsilon(1e-6));
    CHECK(r.n == 8);
    CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {1.0}), std::invalid_argument);
    // zero-variance differences
    CHECK_THROWS_AS(paired_t_test({1.0, 2.0, 3.0}, {0.5, 1.5, 2.5}), std::invalid_argument);
}

TEST_CASE("welch t-test matches the frozen oracle") {
    const std::vector<double> a = {2.1, 1.9, 2.5, 2.3, 2.0, 2.2, 1.8, 2.4};
    const std::vector<double> b = {1.8, 2.0, 2.2, 1.9, 1.7, 2.1, 1.6, 2.0};
    const TestResult r = welch_t_test(a, b);
    CHECK(r.statistic == doctest::Approx(2.1111111111111134).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(0.053881830217701).epsilon(1e-6));
}

TEST_CASE("wilcoxon: exact fixture with ties matches scipy") {
    const std::vector<double> a = {2.1, 1.9, 2.5, 2.3, 2.0, 2.2, 1.8, 2.4};
    const std::vector<double> b = {1.8, 2.0, 2.2, 1.9, 1.7, 2.1, 1.6, 2.0};
    const TestResult r = wilcoxon_signed_rank(a, b);
    CHECK(r.p_value == doctest::Approx(0.0234375).epsilon(1e-12));
}

TEST_CASE("wilcoxon 6/6 positives gives exact p = 0.03125") {
    const std::vector<double> a = {1, 2, 3, 4, 5, 6};
    const std::vector<double> b = {0, 1, 2, 3, 4, 5.5};
    const TestResult r = wilcoxon_signed_rank(a, b);
    CHECK(r.p_value == doctest::Approx(0.03125).epsilon(1e-12));
}

TEST_CASE("wilcoxon exact DP matches sign-flip enumeration on random samples") {
    cr::Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + rng.below(7);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            // quantized values force occasional ties in |diff|
            a[i] = std::round(rng.normal() * 4.0) / 4.0;
            b[i] = std::round(rng.normal() * 4.0) / 4.0;
        }
        std::vector<double> diffs(n);
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < n; ++i) {
            diffs[i] = a[i] - b[i];
            if (diffs[i] != 0.0) ++nonzero;
        }
        if (nonzero < 5) continue;  // below the implementation's exact-test floor
        const TestResult r = wilcoxon_signed_rank(a, b);
        CHECK(r.p_value == doctest::Approx(wilcoxon_enum_p(diffs)).epsilon(1e-10));
    }
}

TEST_CASE("wilcoxon normal approximation for large n stays in (0,1]") {
    cr::Rng rng(72);
    std::vector<double> a(60), b(60);
    for (std::size_t i = 0; i < 60; ++i) {
        a[i] = rng.normal() + 0.3;
        b[i] = rng.normal();
    }
    const TestResult r = wilcoxon_signed_rank(a, b);
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
    CHECK(r.test_name.find("wilcoxon") != std::string::npos);
}

TEST_CASE("sign test: 24/24 positives is exactly 2^-23") {
    std::vector<double> a(24), b(24, 0.0);
    for (auto& v : a) v = 1.0;
    const TestResult r = sign_test(a, b);
    CHECK(r.p_value == std::ldexp(1.0, -23));
    CHECK(r.p_value == doctest::Approx(1.1920928955078125e-07));
}

TEST_CASE("sign test: 7 of 8 positives") {
    std::vector<double> a = {1, 1, 1, 1, 1, 1, 1, -1};
    std::vector<double> b(8, 0.0);
    const TestResult r = sign_test(a, b);
    // 2 * P(X >= 7 | n=8, p=1/2) = 2 * 9/256
    CHECK(r.p_value == doctest::Approx(18.0 / 256.0).epsilon(1e-12));
}

TEST_CASE("sign test drops ties and caps p at 1") {
    std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> b = {1.0, 2.0, 4.0, 3.0};  // two ties, one +, one -
    const TestResult r = sign_test(a, b);
    CHECK(r.n == 2);
    CHECK(r.p_value <= 1.0);
}

TEST_CASE("bonferroni") {
    CHECK(bonferroni_alpha(0.05, 5) == doctest::Approx(0.01));
    CHECK_THROWS_AS(bonferroni_alpha(0.05, 0), std::invalid_argument);
}
