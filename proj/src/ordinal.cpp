#include "cr/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "cr/sensitivity.hpp"  // percentile

namespace cr {
namespace ordinal {

void Thresholds::validate() const {
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw std::invalid_argument("thresholds must be strictly increasing");
}

int map_to_class(double y, const Thresholds& th) {
    th.validate();
    int cls = 1;
    for (double t : th.t)
        if (y >= t) ++cls;  // ties map upward
    return cls;
}

std::vector<int> map_scores(const std::vector<double>& scores, const Thresholds& th) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = map_to_class(scores[i], th);
    return out;
}

double qwk(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes) {
    if (pred.size() != truth.size()) throw std::invalid_argument("qwk: length mismatch");
    if (pred.empty()) throw std::invalid_argument("qwk: empty input");
    const int k = num_classes;
    std::vector<double> O(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> row(k, 0.0), col(k, 0.0);
    for (std::size_t s = 0; s < pred.size(); ++s) {
        const int i = pred[s] - 1, j = truth[s] - 1;
        if (i < 0 || i >= k || j < 0 || j >= k)
            throw std::invalid_argument("qwk: class out of range 1..K");
        O[i * k + j] += 1.0;
        row[i] += 1.0;
        col[j] += 1.0;
    }
    const double n = static_cast<double>(pred.size());
    const double wd = k > 1 ? static_cast<double>((k - 1) * (k - 1)) : 1.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) / wd;
            num += w * O[i * k + j];
            den += w * row[i] * col[j] / n;
        }
    if (den == 0.0) return 0.0;  // degenerate single-class case
    return 1.0 - num / den;
}

Thresholds quantile_init(const std::vector<double>& scores, int num_classes) {
    Thresholds th;
    for (int i = 1; i < num_classes; ++i) {
        double q = percentile(scores, 100.0 * i / num_classes);
        // keep strictly increasing even when quantiles collide
        if (!th.t.empty() && q <= th.t.back()) q = th.t.back() + 1e-9;
        th.t.push_back(q);
    }
    return th;
}

Thresholds threshold_search(const std::vector<double>& scores, const std::vector<int>& truth,
                            int num_classes, double grid_step) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("threshold_search: length mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("threshold_search: non-finite score");
    const std::set<double> distinct(scores.begin(), scores.end());
    if (static_cast<int>(distinct.size()) < num_classes)
        throw std::invalid_argument("threshold_search: fewer distinct scores than classes");

    const double lo_bound = *std::min_element(scores.begin(), scores.end()) - grid_step;
    const double hi_bound = *std::max_element(scores.begin(), scores.end()) + grid_step;

    Thresholds th = quantile_init(scores, num_classes);
    double best_qwk = qwk(map_scores(scores, th), truth, num_classes);

    constexpr int kMaxCycles = 100;
    for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
        bool moved = false;
        for (std::size_t i = 0; i < th.t.size(); ++i) {
            const double lo = i == 0 ? lo_bound : th.t[i - 1];
            const double hi = i + 1 == th.t.size() ? hi_bound : th.t[i + 1];
            const double incumbent = th.t[i];
            // candidates: ascending grid over the open interval, plus the
            // incumbent; argmax with smallest-value tie-break
            std::vector<double> cands;
            for (double c = lo + grid_step; c < hi; c += grid_step) cands.push_back(c);
            cands.push_back(incumbent);
            std::sort(cands.begin(), cands.end());
            double best_t = incumbent;
            for (double cand : cands) {
                th.t[i] = cand;
                const double q = qwk(map_scores(scores, th), truth, num_classes);
                if (q > best_qwk) {  // scan is ascending: ties keep the smaller
                    best_qwk = q;
                    best_t = cand;
                }
            }
            if (best_t != incumbent) moved = true;
            th.t[i] = best_t;
        }
        if (!moved) break;
    }
    th.validate();
    return th;
}

}  // namespace ordinal
}  // namespace cr
