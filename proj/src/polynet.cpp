#include "cr/polynet.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cr/rng.hpp"

namespace cr {

namespace {
constexpr double kMaxAbsInput = 10.0;
constexpr int kSerializationVersion = 1;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu_value(double z) { return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2)); }
double gelu_deriv(double z) {
    const double cdf = 0.5 * (1.0 + std::erf(z * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
    return cdf + z * pdf;
}
double gelu_second_deriv(double z) {
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
    return (2.0 - z * z) * pdf;
}
}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Poly: return "poly";
        case Activation::Relu: return "relu";
        case Activation::Gelu: return "gelu";
        case Activation::Linear: return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "poly") return Activation::Poly;
    if (s == "relu") return Activation::Relu;
    if (s == "gelu") return Activation::Gelu;
    if (s == "linear") return Activation::Linear;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Regularizer::Kind k) {
    switch (k) {
        case Regularizer::Kind::None: return "none";
        case Regularizer::Kind::Dreg: return "dreg";
        case Regularizer::Kind::Igpen: return "igpen";
        case Regularizer::Kind::SpectralNorm: return "spectral_norm";
    }
    return "?";
}

std::size_t PolyNetwork::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

void PolyNetwork::validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    std::size_t prev = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.in_dim() != prev) {
            throw std::invalid_argument("layer " + std::to_string(l) + " expects input width " +
                                        std::to_string(layer.in_dim()) + ", got " +
                                        std::to_string(prev));
        }
        if (layer.b.size() != layer.out_dim())
            throw std::invalid_argument("layer " + std::to_string(l) + " bias size mismatch");
        if (layer.act == Activation::Poly) {
            if (layer.alpha.rows() != layer.out_dim() || layer.alpha.cols() < 1)
                throw std::invalid_argument("layer " + std::to_string(l) +
                                            " alpha shape mismatch");
        } else if (layer.alpha.size() != 0) {
            throw std::invalid_argument("layer " + std::to_string(l) +
                                        " carries alpha but is not poly");
        }
        prev = layer.out_dim();
    }
}

double poly_eval(const double* alpha, std::size_t degree, double z) {
    // Horner on sum_{k=1..G} alpha_k z^k = z * (a1 + z*(a2 + ... ))
    double acc = 0.0;
    for (std::size_t k = degree; k-- > 0;) acc = acc * z + alpha[k];
    return acc * z;
}

double poly_eval(const Vector& alpha_row, double z) {
    return poly_eval(alpha_row.data(), alpha_row.size(), z);
}

double poly_deriv(const double* alpha, std::size_t degree, double z) {
    double acc = 0.0;
    for (std::size_t k = degree; k-- > 0;) acc = acc * z + static_cast<double>(k + 1) * alpha[k];
    return acc;
}

double poly_deriv(const Vector& alpha_row, double z) {
    return poly_deriv(alpha_row.data(), alpha_row.size(), z);
}

double poly_second_deriv(const double* alpha, std::size_t degree, double z) {
    double acc = 0.0;
    for (std::size_t k = degree; k-- > 1;)
        acc = acc * z + static_cast<double>((k + 1) * k) * alpha[k];
    return acc;
}

double act_value(Activation act, const double* alpha, std::size_t degree, double z) {
    switch (act) {
        case Activation::Poly: return poly_eval(alpha, degree, z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Gelu: return gelu_value(z);
        case Activation::Linear: return z;
    }
    return 0.0;
}

double act_deriv(Activation act, const double* alpha, std::size_t degree, double z) {
    switch (act) {
        case Activation::Poly: return poly_deriv(alpha, degree, z);
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;  // exactly 0 at z == 0
        case Activation::Gelu: return gelu_deriv(z);
        case Activation::Linear: return 1.0;
    }
    return 0.0;
}

double act_second_deriv(Activation act, const double* alpha, std::size_t degree, double z) {
    switch (act) {
        case Activation::Poly: return poly_second_deriv(alpha, degree, z);
        case Activation::Relu: return 0.0;
        case Activation::Gelu: return gelu_second_deriv(z);
        case Activation::Linear: return 0.0;
    }
    return 0.0;
}

namespace {

// Fills z, h, dphi for one layer; throws naming the neuron on overflow.
void eval_layer_values(const PolyLayer& layer, const Vector& h_in, Vector& z, Vector& h) {
    z = matvec(layer.W, h_in);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.b[i];
    h.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
        h[i] = act_value(layer.act, arow, layer.degree(), z[i]);
        if (!std::isfinite(h[i]))
            throw std::runtime_error("activation overflow at neuron " + std::to_string(i) +
                                     " (z=" + std::to_string(z[i]) + ")");
    }
}

Vector layer_dphi(const PolyLayer& layer, const Vector& z) {
    Vector d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
        d[i] = act_deriv(layer.act, arow, layer.degree(), z[i]);
    }
    return d;
}

// S_out = diag(d) * A, reusing A's storage when possible.
Matrix row_scaled(const Matrix& a, const Vector& d) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] *= d[i];
    }
    return out;
}

}  // namespace

LayerOut layer_forward(const PolyLayer& layer, const DualState& in) {
    LayerOut out;
    eval_layer_values(layer, in.h, out.z, out.state.h);
    const Vector d = layer_dphi(layer, out.z);
    out.state.S = row_scaled(matmul(layer.W, in.S), d);
    return out;
}

ForwardResult network_forward(const PolyNetwork& net, const Vector& x, bool with_jacobian) {
    if (x.size() != net.input_dim)
        throw std::invalid_argument("input length " + std::to_string(x.size()) +
                                    " != network input_dim " + std::to_string(net.input_dim));
    for (double v : x)
        if (!(std::abs(v) <= kMaxAbsInput))
            throw std::invalid_argument(
                "input out of range: |x| must be <= 10 (scale features first)");

    const std::size_t L = net.layers.size();
    ForwardResult fr;
    fr.with_jacobian = with_jacobian;
    fr.states.resize(L);
    fr.zs.resize(L);
    fr.h_ins.resize(L);
    fr.As.resize(L);

    const Vector* h_prev = &x;
    const Matrix* S_prev = nullptr;
    for (std::size_t l = 0; l < L; ++l) {
        const PolyLayer& layer = net.layers[l];
        fr.h_ins[l] = *h_prev;
        eval_layer_values(layer, *h_prev, fr.zs[l], fr.states[l].h);
        if (with_jacobian) {
            const Vector d = layer_dphi(layer, fr.zs[l]);
            if (l == 0) {
                // S^(0) = I, so A^(1) = W^(1); skip the identity product.
                fr.states[l].S = row_scaled(layer.W, d);
            } else {
                fr.As[l] = matmul(layer.W, *S_prev);
                fr.states[l].S = row_scaled(fr.As[l], d);
            }
            S_prev = &fr.states[l].S;
        }
        h_prev = &fr.states[l].h;
    }
    return fr;
}

double dreg_penalty(const std::vector<DualState>& states, Regularizer::Scope scope) {
    if (states.empty()) throw std::invalid_argument("dreg_penalty: no states");
    if (scope == Regularizer::Scope::FinalLayer) return frobenius_norm_sq(states.back().S);
    double sum = 0.0;
    for (const auto& s : states) sum += frobenius_norm_sq(s.S);
    return sum;
}

PolyNetwork make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t out_dim, Activation hidden_act, std::size_t degree,
                         Regularizer reg, Rng& rng, bool alpha_noise) {
    PolyNetwork net;
    net.input_dim = input_dim;
    net.reg = reg;

    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    for (auto h : hidden) widths.push_back(h);
    widths.push_back(out_dim);

    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
        const bool is_readout = (l + 2 == widths.size());
        PolyLayer layer;
        layer.act = is_readout ? Activation::Linear : hidden_act;
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        if (layer.act == Activation::Poly) limit /= std::sqrt(static_cast<double>(degree));
        layer.W = Matrix(fan_out, fan_in);
        for (double& w : layer.W.data()) w = rng.uniform(-limit, limit);
        layer.b = Vector(fan_out, 0.0);
        if (layer.act == Activation::Poly) {
            layer.alpha = Matrix(fan_out, degree);
            for (std::size_t i = 0; i < fan_out; ++i) {
                layer.alpha(i, 0) = 1.0;
                if (alpha_noise)
                    for (std::size_t k = 0; k < degree; ++k)
                        layer.alpha(i, k) += rng.uniform(-0.01, 0.01);
            }
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

std::string network_to_json(const PolyNetwork& net) {
    nlohmann::json j;
    j["version"] = kSerializationVersion;
    j["input_dim"] = net.input_dim;
    j["regularizer"] = {{"kind", to_string(net.reg.kind)},
                        {"lambda", net.reg.lambda},
                        {"scope", net.reg.effective_scope() == Regularizer::Scope::FinalLayer
                                      ? "final_layer"
                                      : "all_layers"},
                        {"power_iters", net.reg.power_iters}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        layers.push_back({{"activation", to_string(l.act)},
                          {"out_dim", l.out_dim()},
                          {"in_dim", l.in_dim()},
                          {"degree", l.degree()},
                          {"W", l.W.data()},
                          {"b", l.b},
                          {"alpha", l.alpha.data()}});
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

PolyNetwork network_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != kSerializationVersion)
        throw std::runtime_error("unsupported network file version");
    PolyNetwork net;
    net.input_dim = j.at("input_dim").get<std::size_t>();
    const auto& r = j.at("regularizer");
    const std::string kind = r.at("kind").get<std::string>();
    if (kind == "none")
        net.reg.kind = Regularizer::Kind::None;
    else if (kind == "dreg")
        net.reg.kind = Regularizer::Kind::Dreg;
    else if (kind == "igpen")
        net.reg.kind = Regularizer::Kind::Igpen;
    else if (kind == "spectral_norm")
        net.reg.kind = Regularizer::Kind::SpectralNorm;
    else
        throw std::runtime_error("unknown regularizer kind: " + kind);
    net.reg.lambda = r.at("lambda").get<double>();
    net.reg.scope = r.at("scope").get<std::string>() == "final_layer"
                        ? Regularizer::Scope::FinalLayer
                        : Regularizer::Scope::AllLayers;
    net.reg.power_iters = r.at("power_iters").get<int>();
    for (const auto& lj : j.at("layers")) {
        PolyLayer l;
        l.act = activation_from_string(lj.at("activation").get<std::string>());
        const auto out = lj.at("out_dim").get<std::size_t>();
        const auto in = lj.at("in_dim").get<std::size_t>();
        const auto degree = lj.at("degree").get<std::size_t>();
        l.W = Matrix(out, in, lj.at("W").get<std::vector<double>>());
        l.b = lj.at("b").get<Vector>();
        auto alpha_flat = lj.at("alpha").get<std::vector<double>>();
        l.alpha = alpha_flat.empty() ? Matrix() : Matrix(out, degree, std::move(alpha_flat));
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

void save_network(const PolyNetwork& net, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << network_to_json(net);
}

PolyNetwork load_network(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return network_from_json(ss.str());
}

}  // namespace cr
