#pragma once

#include <cstdint>
#include <functional>

#include "cr/data.hpp"
#include "cr/grad.hpp"
#include "cr/polynet.hpp"

namespace cr {
namespace robust {

struct AttackConfig {
    double epsilon = 8.0 / 255.0;  // L-inf budget in normalized input units
    std::size_t steps = 10;
    double step_size = 0.0;  // <= 0 means the 2.5 * eps / steps default
    std::uint64_t seed = 0;
    bool random_start = true;

    double resolved_step_size() const {
        return step_size > 0.0 ? step_size
                               : 2.5 * epsilon / static_cast<double>(steps);
    }
};

// L-inf PGD: seeded uniform start in [-eps, eps], sign-gradient ascent steps,
// projection onto the eps-ball and the [0,1] domain after each step.
Vector pgd_attack(const PolyNetwork& net, const Vector& x, int label,
                  const AttackConfig& cfg, LossKind loss_kind);

enum class CorruptionKind { GaussianNoise, ImpulseNoise };

// Desk-scale corruption schedule, severity 1..5:
//   gaussian: sigma in {0.04, 0.06, 0.08, 0.09, 0.10}
//   impulse:  salt-and-pepper on fraction {0.01, 0.02, 0.03, 0.05, 0.07}
// of coordinates (count = ceil(f * D)); clipped to [0,1], seeded.
Vector corrupt(const Vector& x, CorruptionKind kind, int severity, std::uint64_t seed);

double corruption_fraction(int severity);
double corruption_sigma(int severity);

// Accuracy over probed inputs; probe(i, x) -> perturbed input.
using Probe = std::function<Vector(std::size_t, const Vector&)>;
double robust_accuracy(const PolyNetwork& net, const Dataset& ds, const Probe& probe);

}  // namespace robust
}  // namespace cr
