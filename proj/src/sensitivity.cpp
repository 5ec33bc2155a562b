#include "cr/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cr {

std::string to_string(IgSource s) {
    return s == IgSource::LossGrad ? "loss_grad" : "output_jacobian_fro";
}

std::vector<double> input_gradient_norms(const PolyNetwork& net, const Dataset& ds,
                                         IgSource source) {
    if (ds.dim() != net.input_dim)
        throw std::invalid_argument("dataset dimension does not match network input");
    const LossKind loss_kind =
        ds.kind == TargetKind::Classes ? LossKind::CrossEntropy : LossKind::Mse;
    std::vector<double> norms(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (source == IgSource::LossGrad) {
            const int label = ds.kind == TargetKind::Classes ? ds.labels[i] : 0;
            const double target = ds.kind == TargetKind::Classes ? 0.0 : ds.scalar_target(i);
            norms[i] = l2_norm(input_gradient(net, ds.row(i), loss_kind, label, target));
        } else {
            const ForwardResult fr = network_forward(net, ds.row(i), true);
            norms[i] = std::sqrt(frobenius_norm_sq(fr.jacobian()));
        }
    }
    return norms;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    if (lo == hi) return v[lo];
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

SensitivityReport summarize(const std::vector<double>& norms, IgSource source) {
    if (norms.empty()) throw std::invalid_argument("summarize: empty input");
    SensitivityReport r;
    r.n_samples = norms.size();
    r.ig_source = source;
    double sum = 0.0;
    for (double v : norms) sum += v;
    r.mean = sum / static_cast<double>(norms.size());
    r.p95 = percentile(norms, 95.0);
    r.p99 = percentile(norms, 99.0);
    r.max = *std::max_element(norms.begin(), norms.end());
    r.tail_ratio = r.mean > 0.0 ? r.p99 / r.mean : 0.0;
    return r;
}

ChainCheck lipschitz_chain_check(const PolyNetwork& net, const Vector& x) {
    const ForwardResult fr = network_forward(net, x, true);
    double rhs = 1.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const PolyLayer& layer = net.layers[l];
        double fro_sq = 0.0;
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
            const double d = act_deriv(layer.act, arow, layer.degree(), fr.zs[l][i]);
            const double* wrow = layer.W.row_ptr(i);
            for (std::size_t j = 0; j < layer.in_dim(); ++j)
                fro_sq += d * d * wrow[j] * wrow[j];
        }
        rhs *= std::sqrt(fro_sq);
    }
    return {std::sqrt(frobenius_norm_sq(fr.jacobian())), rhs};
}

double pareto_distance(double acc, double tail_ratio, double tail_ratio_min) {
    if (acc < 0.0 || acc > 1.0) throw std::invalid_argument("pareto_distance: acc in [0,1]");
    if (tail_ratio < tail_ratio_min)
        throw std::invalid_argument("pareto_distance: tail_ratio below tail_ratio_min");
    const double da = 1.0 - acc;
    const double dt = tail_ratio - tail_ratio_min;
    return std::sqrt(da * da + dt * dt);
}

double efficiency_kpi(double acc_percent, std::size_t params) {
    if (params < 10) throw std::invalid_argument("efficiency_kpi: params must be >= 10");
    return acc_percent / std::log10(static_cast<double>(params));
}

}  // namespace cr
