#pragma once

#include "cr/matrix.hpp"

namespace cr {

// Power-iteration state for one weight matrix, persisted across training
// steps (warm start). u and v are unit-norm after each iteration.
struct PowerIterState {
    Vector u;  // left singular vector estimate, length rows
    Vector v;  // right singular vector estimate, length cols
    std::size_t iters = 0;
};

// Largest-singular-value estimate of W via `iters` power iterations on
// W^T W, warm-started from `state`. Zero matrix -> sigma = 0.
double spectral_norm_estimate(const Matrix& w, std::size_t iters, PowerIterState& state);

// Projection onto the unit spectral ball: W / max(sigma, 1). Matrices
// already inside the ball are unchanged.
Matrix apply_spectral_constraint(const Matrix& w, double sigma);

}  // namespace cr
