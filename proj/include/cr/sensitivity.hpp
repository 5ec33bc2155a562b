#pragma once

#include <string>
#include <vector>

#include "cr/data.hpp"
#include "cr/grad.hpp"
#include "cr/polynet.hpp"

namespace cr {

enum class IgSource { LossGrad, OutputJacobianFro };

std::string to_string(IgSource s);

// Distributional summary of per-sample input-gradient norms. Percentiles use
// linear interpolation between closest ranks (inclusive endpoints); this
// convention is also what golden comparisons assume.
struct SensitivityReport {
    double mean = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
    double max = 0.0;
    double tail_ratio = 0.0;  // p99 / mean when mean > 0
    std::size_t n_samples = 0;
    IgSource ig_source = IgSource::LossGrad;
};

// Per-sample scalar: LossGrad -> ||d L_task / d x||_2 via the reverse pass;
// OutputJacobianFro -> ||S^(L)||_F from the dual stream.
std::vector<double> input_gradient_norms(const PolyNetwork& net, const Dataset& ds,
                                         IgSource source);

double percentile(std::vector<double> sorted_or_not, double q);

SensitivityReport summarize(const std::vector<double>& norms, IgSource source);

// Pointwise layer-chain bound: lhs = ||S^(L)(x)||_F,
// rhs = prod_l ||diag(phi'(z^(l))) W^(l)||_F; lhs <= rhs always.
struct ChainCheck {
    double lhs;
    double rhs;
};
ChainCheck lipschitz_chain_check(const PolyNetwork& net, const Vector& x);

// Euclidean distance of (accuracy, tail_ratio) to the utopian corner
// (1.0, tail_ratio_min), raw tail-ratio scale.
double pareto_distance(double acc, double tail_ratio, double tail_ratio_min);

// acc_percent / log10(params); params < 10 is a domain error.
double efficiency_kpi(double acc_percent, std::size_t params);

}  // namespace cr
