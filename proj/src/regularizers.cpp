#include "cr/regularizers.hpp"

#include <cmath>
#include <stdexcept>

#include "cr/rng.hpp"

namespace cr {

double spectral_norm_estimate(const Matrix& w, std::size_t iters, PowerIterState& state) {
    if (iters < 1) throw std::invalid_argument("spectral_norm_estimate: iters >= 1");
    if (frobenius_norm_sq(w) == 0.0) return 0.0;

    if (state.v.size() != w.cols()) {
        // Fixed deterministic start; warm starts take over after the first call.
        Rng rng(0x5eed);
        state.v.resize(w.cols());
        for (double& x : state.v) x = rng.normal();
        const double n = l2_norm(state.v);
        for (double& x : state.v) x /= n;
    }

    double sigma = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        state.u = matvec(w, state.v);
        const double un = l2_norm(state.u);
        if (un == 0.0) {  // v landed in the null space; restart direction
            for (double& x : state.v) x = 1.0 / std::sqrt(double(state.v.size()));
            continue;
        }
        for (double& x : state.u) x /= un;
        state.v = matvec_transposed(w, state.u);
        sigma = l2_norm(state.v);
        if (sigma > 0.0)
            for (double& x : state.v) x /= sigma;
        ++state.iters;
    }
    return sigma;
}

Matrix apply_spectral_constraint(const Matrix& w, double sigma) {
    if (sigma <= 1.0) return w;
    Matrix out = w;
    const double inv = 1.0 / sigma;
    for (double& x : out.data()) x *= inv;
    return out;
}

}  // namespace cr
