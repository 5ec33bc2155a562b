#include "cr/robust.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cr/rng.hpp"

namespace cr {
namespace robust {

Vector pgd_attack(const PolyNetwork& net, const Vector& x, int label,
                  const AttackConfig& cfg, LossKind loss_kind) {
    if (cfg.steps < 1) throw std::invalid_argument("pgd: steps >= 1");
    const double eps = cfg.epsilon;
    if (eps == 0.0) return x;
    const double step = cfg.resolved_step_size();

    Vector adv = x;
    if (cfg.random_start) {
        Rng rng(cfg.seed);
        for (double& v : adv) v += rng.uniform(-eps, eps);
    }
    auto project = [&](Vector& v) {
        for (std::size_t j = 0; j < v.size(); ++j)
            v[j] = std::clamp(std::clamp(v[j], x[j] - eps, x[j] + eps), 0.0, 1.0);
    };
    project(adv);

    for (std::size_t it = 0; it < cfg.steps; ++it) {
        const Vector g = input_gradient(net, adv, loss_kind, label, 0.0);
        for (std::size_t j = 0; j < adv.size(); ++j) {
            const double s = g[j] > 0.0 ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
            adv[j] += step * s;
        }
        project(adv);
    }
    return adv;
}

double corruption_sigma(int severity) {
    static const double table[5] = {0.04, 0.06, 0.08, 0.09, 0.10};
    if (severity < 1 || severity > 5)
        throw std::invalid_argument("corruption severity must be in 1..5");
    return table[severity - 1];
}

double corruption_fraction(int severity) {
    static const double table[5] = {0.01, 0.02, 0.03, 0.05, 0.07};
    if (severity < 1 || severity > 5)
        throw std::invalid_argument("corruption severity must be in 1..5");
    return table[severity - 1];
}

Vector corrupt(const Vector& x, CorruptionKind kind, int severity, std::uint64_t seed) {
    for (double v : x)
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("corrupt: input must lie in [0,1]");
    Rng rng(seed);
    Vector out = x;
    if (kind == CorruptionKind::GaussianNoise) {
        const double sigma = corruption_sigma(severity);
        for (double& v : out) v = std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0);
        return out;
    }
    // Impulse: flip ceil(f * D) distinct coordinates to 0 or 1.
    const double f = corruption_fraction(severity);
    const std::size_t d = x.size();
    const std::size_t n_flip = std::min<std::size_t>(
        d, static_cast<std::size_t>(std::ceil(f * static_cast<double>(d))));
    std::vector<std::size_t> idx(d);
    for (std::size_t i = 0; i < d; ++i) idx[i] = i;
    rng.shuffle(idx);
    for (std::size_t i = 0; i < n_flip; ++i) out[idx[i]] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return out;
}

double robust_accuracy(const PolyNetwork& net, const Dataset& ds, const Probe& probe) {
    if (ds.kind != TargetKind::Classes)
        throw std::invalid_argument("robust_accuracy needs a classification dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Vector x = probe(i, ds.row(i));
        const ForwardResult fr = network_forward(net, x, false);
        const auto& out = fr.output();
        const int pred = static_cast<int>(
            std::max_element(out.begin(), out.end()) - out.begin());
        if (pred == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace robust
}  // namespace cr
