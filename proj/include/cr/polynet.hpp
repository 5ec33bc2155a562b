#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cr/matrix.hpp"

namespace cr {

class Rng;

// Per-layer activation. Hidden layers are poly/relu/gelu; the readout layer
// is always Linear (logits or raw scalar, never passed through phi).
enum class Activation { Poly, Relu, Gelu, Linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Regularizer {
    enum class Kind { None, Dreg, Igpen, SpectralNorm };
    enum class Scope { AllLayers, FinalLayer };

    Kind kind = Kind::None;
    double lambda = 0.0;
    Scope scope = Scope::AllLayers;  // Igpen behaves as Dreg with FinalLayer scope
    int power_iters = 1;

    static Regularizer none() { return {}; }
    static Regularizer dreg(double lambda, Scope scope = Scope::AllLayers) {
        return {Kind::Dreg, lambda, scope, 1};
    }
    static Regularizer igpen(double lambda) {
        return {Kind::Igpen, lambda, Scope::FinalLayer, 1};
    }
    static Regularizer spectral_norm(int power_iters) {
        return {Kind::SpectralNorm, 0.0, Scope::AllLayers, power_iters};
    }

    // True when the training objective contains a lambda * ||S||_F^2 term,
    // i.e. the forward pass must carry the Jacobian stream.
    bool penalizes_jacobian() const {
        return (kind == Kind::Dreg || kind == Kind::Igpen) && lambda > 0.0;
    }
    Scope effective_scope() const {
        return kind == Kind::Igpen ? Scope::FinalLayer : scope;
    }
};

std::string to_string(Regularizer::Kind k);

struct PolyLayer {
    Matrix W;      // out x in
    Vector b;      // out
    Matrix alpha;  // out x G polynomial coefficients (k = 1..G); empty unless Poly
    Activation act = Activation::Poly;

    std::size_t in_dim() const { return W.cols(); }
    std::size_t out_dim() const { return W.rows(); }
    std::size_t degree() const { return alpha.cols(); }
    std::size_t param_count() const { return W.size() + b.size() + alpha.size(); }
};

struct PolyNetwork {
    std::vector<PolyLayer> layers;
    Regularizer reg;
    std::size_t input_dim = 0;

    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t param_count() const;
    // Throws if layer widths do not chain or alpha shapes are inconsistent.
    void validate() const;
};

// phi(z) = sum_{k=1..G} alpha_k z^k, no constant term (the bias provides the
// affine offset). Horner on the no-constant polynomial.
double poly_eval(const double* alpha, std::size_t degree, double z);
double poly_eval(const Vector& alpha_row, double z);
// phi'(z) = sum k alpha_k z^{k-1}
double poly_deriv(const double* alpha, std::size_t degree, double z);
double poly_deriv(const Vector& alpha_row, double z);
// phi''(z), needed by the reverse pass through the Jacobian stream.
double poly_second_deriv(const double* alpha, std::size_t degree, double z);

// phi / phi' / phi'' for any activation kind. `alpha` may be null for
// relu/gelu/linear. relu derivative at z == 0 is exactly 0.
double act_value(Activation act, const double* alpha, std::size_t degree, double z);
double act_deriv(Activation act, const double* alpha, std::size_t degree, double z);
double act_second_deriv(Activation act, const double* alpha, std::size_t degree, double z);

// Per-sample dual state: value vector h and accumulated input Jacobian
// S = dh/dx of shape (width x D). At the input, h = x and S = I_D.
struct DualState {
    Vector h;
    Matrix S;
};

struct LayerOut {
    DualState state;
    Vector z;  // cached pre-activation for the reverse pass
};

// Single layer of the dual-stream pass:
//   z = W h_in + b,  h_out = phi(z),  S_out = diag(phi'(z)) W S_in
LayerOut layer_forward(const PolyLayer& layer, const DualState& in);

// Full forward tape for one sample. When with_jacobian is false the S
// matrices stay empty (training paths with lambda = 0 skip them entirely).
struct ForwardResult {
    std::vector<DualState> states;  // one per layer, l = 1..L
    std::vector<Vector> zs;         // pre-activations per layer
    std::vector<Vector> h_ins;      // h_ins[l] = input of layer l (h_ins[0] = x)
    std::vector<Matrix> As;         // A^l = W^l S^{l-1}; As[0] empty (A^1 = W^1)
    bool with_jacobian = false;

    const Vector& output() const { return states.back().h; }
    const Matrix& jacobian() const { return states.back().S; }
};

// Callers must feed inputs scaled to roughly [0,1] / standardized; max|x|
// <= 10 is asserted because degree-3 polynomials overflow on raw ranges.
ForwardResult network_forward(const PolyNetwork& net, const Vector& x,
                              bool with_jacobian = true);

// Per-sample DREG penalty: sum over layers in scope of ||S^(l)||_F^2.
// Batch averaging happens in the loss.
double dreg_penalty(const std::vector<DualState>& states, Regularizer::Scope scope);

// Network construction. Hidden widths, then a linear readout of out_dim.
// W: Xavier-uniform, scaled by 1/sqrt(G) for poly layers; alpha starts at
// (1, 0, ..., 0) per neuron (near-linear start), optionally +-0.01 noise.
PolyNetwork make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t out_dim, Activation hidden_act, std::size_t degree,
                         Regularizer reg, Rng& rng, bool alpha_noise = false);

// Versioned JSON serialization; doubles round-trip bit-exact.
std::string network_to_json(const PolyNetwork& net);
PolyNetwork network_from_json(const std::string& text);
void save_network(const PolyNetwork& net, const std::string& path);
PolyNetwork load_network(const std::string& path);

}  // namespace cr
