#pragma once

#include <vector>

namespace cr {
namespace ordinal {

// K-1 strictly increasing cut points mapping a scalar score to classes 1..K.
struct Thresholds {
    std::vector<double> t;

    std::size_t num_classes() const { return t.size() + 1; }
    void validate() const;
};

// class = 1 + number of thresholds strictly below y; a score exactly equal
// to T_i maps upward, to class i+1.
int map_to_class(double y, const Thresholds& t);

std::vector<int> map_scores(const std::vector<double>& scores, const Thresholds& t);

// Quadratic Weighted Kappa over classes 1..K, Cohen form with
// w_ij = (i-j)^2/(K-1)^2; degenerate zero E-denominator -> 0.
double qwk(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes);

// Equal-quantile thresholds of the score distribution (the search start).
Thresholds quantile_init(const std::vector<double>& scores, int num_classes);

// Cyclic coordinate ascent: each T_i in turn scans a grid over
// (T_{i-1}, T_{i+1}) at grid_step resolution, keeping the QWK argmax
// (smallest grid value on ties); cycles until no threshold moves.
Thresholds threshold_search(const std::vector<double>& scores, const std::vector<int>& truth,
                            int num_classes, double grid_step = 0.05);

}  // namespace ordinal
}  // namespace cr
