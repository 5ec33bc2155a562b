#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <vector>

#include "cr/ordinal.hpp"
#include "cr/rng.hpp"

using namespace cr::ordinal;

namespace {

// Independent QWK oracle straight from the definition: build the confusion
// matrix, the outer-product expectation, and the quadratic weights cell by
// cell with no marginal shortcuts.
double qwk_oracle(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
    const std::size_t n = pred.size();
    std::vector<std::vector<double>> O(k, std::vector<double>(k, 0.0));
    for (std::size_t s = 0; s < n; ++s) O[pred[s] - 1][truth[s] - 1] += 1.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            double row_i = 0.0, col_j = 0.0;
            for (int t = 0; t < k; ++t) {
                row_i += O[i][t];
                col_j += O[t][j];
            }
            const double e_ij = row_i * col_j / static_cast<double>(n);
            const double w = static_cast<double>((i - j) * (i - j)) /
                             static_cast<double>((k - 1) * (k - 1));
            num += w * O[i][j];
            den += w * e_ij;
        }
    return den == 0.0 ? 0.0 : 1.0 - num / den;
}

}  // namespace

TEST_CASE("map_to_class with the documented thresholds on a 10-point grid") {
    Thresholds th;
    th.t = {0.2, 1.5, 2.5, 3.8};
    const std::vector<double> ys = {-1.0, 0.0, 0.2, 1.0, 1.5, 2.0, 2.5, 3.0, 3.8, 5.0};
    const std::vector<int> want = {1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
    for (std::size_t i = 0; i < ys.size(); ++i) CHECK(map_to_class(ys[i], th) == want[i]);
}

TEST_CASE("map_to_class is monotone in y") {
    Thresholds th;
    th.t = {-0.5, 0.1, 2.0};
    int prev = 1;
    for (double y = -3.0; y <= 4.0; y += 0.05) {
        const int c = map_to_class(y, th);
        CHECK(c >= prev);
        CHECK(c >= 1);
        CHECK(c <= 4);
        prev = c;
    }
}

TEST_CASE("thresholds must be strictly increasing") {
    Thresholds bad;
    bad.t = {1.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("qwk identity and anti-identity exact cases") {
    const std::vector<int> truth = {1, 2, 3, 4, 5, 1, 2, 3, 4, 5};
    CHECK(qwk(truth, truth, 5) == 1.0);
    std::vector<int> anti(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) anti[i] = 6 - truth[i];
    const double got = qwk(anti, truth, 5);
    CHECK(got == doctest::Approx(qwk_oracle(anti, truth, 5)).epsilon(1e-14));
    CHECK(got < 0.0);  // reversal is worse than chance
}

TEST_CASE("qwk matches the cell-by-cell oracle on random confusions") {
    cr::Rng rng(81);
    for (int trial = 0; trial < 30; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(5));
        const std::size_t n = 10 + rng.below(40);
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = 1 + static_cast<int>(rng.below(k));
            truth[i] = 1 + static_cast<int>(rng.below(k));
        }
        CHECK(qwk(pred, truth, k) ==
              doctest::Approx(qwk_oracle(pred, truth, k)).epsilon(1e-12));
    }
}

TEST_CASE("qwk degenerate single-class case returns 0") {
    const std::vector<int> ones = {1, 1, 1};
    CHECK(qwk(ones, ones, 3) == 0.0);
}

TEST_CASE("quantile_init produces sorted thresholds splitting the score range") {
    std::vector<double> scores;
    for (int i = 0; i < 100; ++i) scores.push_back(static_cast<double>(i));
    const Thresholds th = quantile_init(scores, 4);
    REQUIRE(th.t.size() == 3);
    th.validate();
    CHECK(th.t[0] < th.t[1]);
    CHECK(th.t[1] < th.t[2]);
    CHECK(th.t[0] > 0.0);
    CHECK(th.t[2] < 99.0);
}

TEST_CASE("threshold_search attains QWK 1.0 on a separable fixture") {
    std::vector<double> scores;
    std::vector<int> truth;
    cr::Rng rng(82);
    for (int c = 1; c <= 4; ++c)
        for (int i = 0; i < 25; ++i) {
            scores.push_back(c + rng.uniform(-0.3, 0.3));
            truth.push_back(c);
        }
    const Thresholds th = threshold_search(scores, truth, 4);
    th.validate();
    CHECK(qwk(map_scores(scores, th), truth, 4) == 1.0);
}

TEST_CASE("threshold_search never ends below the quantile-init QWK") {
    cr::Rng rng(83);
    std::vector<double> scores;
    std::vector<int> truth;
    for (int i = 0; i < 200; ++i) {
        const int c = 1 + static_cast<int>(rng.below(5));
        scores.push_back(c + rng.normal(0.0, 0.8));  // heavy overlap
        truth.push_back(c);
    }
    const double init_q =
        qwk(map_scores(scores, quantile_init(scores, 5)), truth, 5);
    const Thresholds th = threshold_search(scores, truth, 5);
    CHECK(qwk(map_scores(scores, th), truth, 5) >= init_q - 1e-12);
}

TEST_CASE("threshold_search needs at least K distinct scores") {
    const std::vector<double> scores = {1.0, 1.0, 2.0, 2.0};
    const std::vector<int> truth = {1, 1, 2, 3};
    CHECK_THROWS_AS(threshold_search(scores, truth, 3), std::invalid_argument);
}
