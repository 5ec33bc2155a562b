#include "cr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cr {
namespace stats {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
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
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::vector<double> paired_diffs(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired samples: length mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

// Average ranks of |d|, doubled so ties produce integers.
std::vector<long long> doubled_ranks(const std::vector<double>& absd) {
    const std::size_t n = absd.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return absd[i] < absd[j]; });
    std::vector<long long> r2(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
        // tied block spans ranks i+1 .. j+1; doubled average = (i+1) + (j+1)
        const long long avg2 = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) r2[order[k]] = avg2;
        i = j + 1;
    }
    return r2;
}

double binom_cdf_half(std::size_t k, std::size_t n) {
    // P(X <= k) for X ~ Binomial(n, 1/2), exact term recurrence.
    double term = std::exp2(-static_cast<double>(n));  // C(n,0) / 2^n
    double sum = term;
    for (std::size_t i = 1; i <= k; ++i) {
        term *= static_cast<double>(n - i + 1) / static_cast<double>(i);
        sum += term;
    }
    return std::min(sum, 1.0);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_two_sided: df > 0");
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> d = paired_diffs(a, b);
    const std::size_t n = d.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: n >= 2");
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : d) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    if (var == 0.0) {
        if (mean == 0.0) return {0.0, 1.0, n, "paired_t"};
        throw std::invalid_argument("paired_t_test: zero-variance nonzero differences");
    }
    const double t = mean / std::sqrt(var / static_cast<double>(n));
    return {t, student_t_two_sided(t, static_cast<double>(n - 1)), n, "paired_t"};
}

TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (const double v : paired_diffs(a, b))
        if (v != 0.0) d.push_back(v);
    const std::size_t n = d.size();
    if (n < 5) throw std::invalid_argument("wilcoxon: n >= 5 after dropping zero differences");

    std::vector<double> absd(n);
    for (std::size_t i = 0; i < n; ++i) absd[i] = std::abs(d[i]);
    const std::vector<long long> r2 = doubled_ranks(absd);

    long long w2_pos = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += r2[i];
        if (d[i] > 0.0) w2_pos += r2[i];
    }

    if (n <= 25) {
        // DP over the distribution of the doubled positive-rank sum across
        // all 2^n sign assignments.
        std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = count.size(); s-- > static_cast<std::size_t>(r2[i]);)
                count[s] += count[s - static_cast<std::size_t>(r2[i])];
        }
        const double denom = std::exp2(static_cast<double>(n));
        double lo = 0.0, hi = 0.0;
        for (std::size_t s = 0; s < count.size(); ++s) {
            if (static_cast<long long>(s) <= w2_pos) lo += count[s];
            if (static_cast<long long>(s) >= w2_pos) hi += count[s];
        }
        const double p = std::min(1.0, 2.0 * std::min(lo, hi) / denom);
        return {static_cast<double>(w2_pos) / 2.0, p, n, "wilcoxon_exact"};
    }

    // Normal approximation with tie correction.
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> sorted = absd;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double w = static_cast<double>(w2_pos) / 2.0;
    const double z = (w - mean) / std::sqrt(var);
    return {w, normal_two_sided(z), n, "wilcoxon_normal"};
}

TestResult sign_test(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t pos = 0, neg = 0;
    for (const double v : paired_diffs(a, b)) {
        if (v > 0.0) ++pos;
        if (v < 0.0) ++neg;
    }
    const std::size_t n = pos + neg;
    if (n < 1) throw std::invalid_argument("sign_test: all ties");
    const std::size_t k = std::min(pos, neg);
    const double p = std::min(1.0, 2.0 * binom_cdf_half(k, n));
    return {static_cast<double>(pos), p, n, "sign_exact"};
}

TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch: each n >= 2");
    auto moments = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
        return std::pair<double, double>{mean, var};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    if (va == 0.0 && vb == 0.0) {
        if (ma == mb) return {0.0, 1.0, a.size() + b.size(), "welch_t"};
        throw std::invalid_argument("welch: degenerate variance in both samples");
    }
    const double sa = va / static_cast<double>(a.size());
    const double sb = vb / static_cast<double>(b.size());
    const double t = (ma - mb) / std::sqrt(sa + sb);
    const double df = (sa + sb) * (sa + sb) /
                      (sa * sa / static_cast<double>(a.size() - 1) +
                       sb * sb / static_cast<double>(b.size() - 1));
    return {t, student_t_two_sided(t, df), a.size() + b.size(), "welch_t"};
}

double bonferroni_alpha(double alpha, std::size_t m) {
    if (m == 0) throw std::invalid_argument("bonferroni: m >= 1");
    return alpha / static_cast<double>(m);
}

}  // namespace stats
}  // namespace cr
