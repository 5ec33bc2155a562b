#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cr/polynet.hpp"
#include "cr/rng.hpp"

using namespace cr;

namespace {

PolyNetwork random_net(Rng& rng, std::size_t d, std::vector<std::size_t> hidden,
                       std::size_t out, Activation act = Activation::Poly) {
    return make_network(d, hidden, out, act, 3, Regularizer::none(), rng, true);
}

// Central-difference Jacobian of the value pass, step tuned for ~1e-8 error.
Matrix fd_jacobian(const PolyNetwork& net, const Vector& x, double h = 1e-5) {
    const std::size_t out = net.output_dim();
    Matrix J(out, x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vector fp = network_forward(net, xp, false).output();
        const Vector fm = network_forward(net, xm, false).output();
        for (std::size_t i = 0; i < out; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("poly_eval/deriv/second_deriv match the naive power sums") {
    const double alpha[3] = {0.7, -0.3, 0.2};
    for (double z : {-1.5, -0.2, 0.0, 0.4, 2.0}) {
        const double want = 0.7 * z - 0.3 * z * z + 0.2 * z * z * z;
        CHECK(poly_eval(alpha, 3, z) == doctest::Approx(want).epsilon(1e-14));
        const double wantd = 0.7 - 0.6 * z + 0.6 * z * z;
        CHECK(poly_deriv(alpha, 3, z) == doctest::Approx(wantd).epsilon(1e-14));
        const double wantdd = -0.6 + 1.2 * z;
        CHECK(poly_second_deriv(alpha, 3, z) == doctest::Approx(wantdd).epsilon(1e-14));
    }
}

TEST_CASE("poly has no constant term") {
    const double alpha[3] = {0.7, -0.3, 0.2};
    CHECK(poly_eval(alpha, 3, 0.0) == 0.0);
}

TEST_CASE("activation derivatives match finite differences") {
    const double alpha[3] = {1.0, 0.5, -0.25};
    const double h = 1e-6;
    for (Activation act : {Activation::Poly, Activation::Gelu, Activation::Linear}) {
        for (double z : {-2.0, -0.5, 0.3, 1.7}) {
            const double fd = (act_value(act, alpha, 3, z + h) -
                               act_value(act, alpha, 3, z - h)) /
                              (2.0 * h);
            CHECK(act_deriv(act, alpha, 3, z) == doctest::Approx(fd).epsilon(1e-6));
            const double fdd = (act_deriv(act, alpha, 3, z + h) -
                                act_deriv(act, alpha, 3, z - h)) /
                               (2.0 * h);
            CHECK(act_second_deriv(act, alpha, 3, z) == doctest::Approx(fdd).epsilon(1e-5));
        }
    }
}

TEST_CASE("relu kink convention: derivative at exactly zero is zero") {
    CHECK(act_value(Activation::Relu, nullptr, 0, 0.0) == 0.0);
    CHECK(act_deriv(Activation::Relu, nullptr, 0, 0.0) == 0.0);
    CHECK(act_deriv(Activation::Relu, nullptr, 0, 1e-12) == 1.0);
    CHECK(act_second_deriv(Activation::Relu, nullptr, 0, 0.5) == 0.0);
}

TEST_CASE("gelu matches the exact erf form at reference points") {
    // gelu(z) = z * Phi(z); Phi(1) = 0.841344746...
    CHECK(act_value(Activation::Gelu, nullptr, 0, 1.0) ==
          doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(act_value(Activation::Gelu, nullptr, 0, 0.0) == 0.0);
}

TEST_CASE("layer_forward hand example") {
    // 2x2 layer, phi(z) = z + z^2 per neuron (alpha = (1,1,0)).
    PolyLayer layer;
    layer.W = Matrix(2, 2, {1.0, 0.0, 0.0, 2.0});
    layer.b = {0.5, -0.5};
    layer.alpha = Matrix(2, 3, {1.0, 1.0, 0.0, 1.0, 1.0, 0.0});
    layer.act = Activation::Poly;

    DualState in;
    in.h = {1.0, 2.0};
    in.S = Matrix::identity(2);
    const LayerOut out = layer_forward(layer, in);
    // z = (1.5, 3.5); h = z + z^2 = (3.75, 15.75); phi' = 1 + 2z = (4, 8)
    CHECK(out.z[0] == doctest::Approx(1.5));
    CHECK(out.z[1] == doctest::Approx(3.5));
    CHECK(out.state.h[0] == doctest::Approx(3.75));
    CHECK(out.state.h[1] == doctest::Approx(15.75));
    // S = diag(phi') W = [[4,0],[0,16]]
    CHECK(out.state.S(0, 0) == doctest::Approx(4.0));
    CHECK(out.state.S(0, 1) == doctest::Approx(0.0));
    CHECK(out.state.S(1, 1) == doctest::Approx(16.0));
}

TEST_CASE("dual-stream Jacobian matches finite differences on random nets") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 2 + rng.below(4);
        PolyNetwork net = random_net(rng, d, {3 + rng.below(4)}, 1 + rng.below(3));
        Vector x(d);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const Matrix S = network_forward(net, x, true).jacobian();
        const Matrix J = fd_jacobian(net, x);
        for (std::size_t i = 0; i < S.rows(); ++i)
            for (std::size_t j = 0; j < S.cols(); ++j)
                CHECK(S(i, j) == doctest::Approx(J(i, j)).epsilon(1e-6));
    }
}

TEST_CASE("jacobian skip mode leaves S empty") {
    Rng rng(22);
    PolyNetwork net = random_net(rng, 3, {4}, 2);
    const ForwardResult fr = network_forward(net, {0.1, -0.2, 0.3}, false);
    CHECK(fr.states.back().S.size() == 0);
    CHECK_FALSE(fr.with_jacobian);
}

TEST_CASE("input magnitude guard rejects |x| > 10") {
    Rng rng(23);
    PolyNetwork net = random_net(rng, 2, {3}, 1);
    CHECK_THROWS_AS(network_forward(net, {11.0, 0.0}, false), std::invalid_argument);
}

TEST_CASE("dreg penalty: final-layer scope never exceeds all-layers scope") {
    Rng rng(24);
    for (int trial = 0; trial < 10; ++trial) {
        PolyNetwork net = random_net(rng, 3, {4, 4}, 2);
        Vector x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const auto states = network_forward(net, x, true).states;
        const double all = dreg_penalty(states, Regularizer::Scope::AllLayers);
        const double fin = dreg_penalty(states, Regularizer::Scope::FinalLayer);
        CHECK(fin <= all + 1e-15);
        CHECK(fin >= 0.0);
    }
}

TEST_CASE("make_network shapes and near-linear alpha init") {
    Rng rng(25);
    PolyNetwork net = make_network(5, {7, 4}, 3, Activation::Poly, 3,
                                   Regularizer::none(), rng, false);
    net.validate();
    REQUIRE(net.layers.size() == 3);
    CHECK(net.layers[0].W.rows() == 7);
    CHECK(net.layers[0].W.cols() == 5);
    CHECK(net.layers[1].W.rows() == 4);
    CHECK(net.layers[2].W.rows() == 3);
    CHECK(net.layers[2].act == Activation::Linear);
    CHECK(net.layers[2].alpha.size() == 0);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(net.layers[0].alpha(i, 0) == 1.0);
        CHECK(net.layers[0].alpha(i, 1) == 0.0);
        CHECK(net.layers[0].alpha(i, 2) == 0.0);
    }
    CHECK(net.param_count() ==
          (7 * 5 + 7 + 7 * 3) + (4 * 7 + 4 + 4 * 3) + (3 * 4 + 3));
}

TEST_CASE("validate rejects non-chaining widths") {
    Rng rng(26);
    PolyNetwork net = random_net(rng, 3, {4}, 2);
    net.layers[1].W = Matrix(2, 5);
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
}

TEST_CASE("JSON round trip is bit-exact") {
    Rng rng(27);
    PolyNetwork net = random_net(rng, 4, {5}, 2);
    net.reg = Regularizer::dreg(0.0031622776601683794);
    const PolyNetwork back = network_from_json(network_to_json(net));
    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(back.layers[l].W == net.layers[l].W);
        CHECK(back.layers[l].b == net.layers[l].b);
        CHECK(back.layers[l].alpha == net.layers[l].alpha);
        CHECK(back.layers[l].act == net.layers[l].act);
    }
    CHECK(back.reg.kind == net.reg.kind);
    CHECK(back.reg.lambda == net.reg.lambda);

    const std::string path = "/tmp/cr_test_net.json";
    save_network(net, path);
    const PolyNetwork loaded = load_network(path);
    CHECK(loaded.layers[0].W == net.layers[0].W);
    std::filesystem::remove(path);
}

TEST_CASE("relu network forward agrees with a hand trace") {
    PolyNetwork net;
    net.input_dim = 2;
    PolyLayer l1;
    l1.W = Matrix(2, 2, {1.0, -1.0, 2.0, 1.0});
    l1.b = {0.0, -3.0};
    l1.act = Activation::Relu;
    PolyLayer l2;
    l2.W = Matrix(1, 2, {1.0, 1.0});
    l2.b = {0.5};
    l2.act = Activation::Linear;
    net.layers = {l1, l2};
    // x = (1, 2): z1 = (-1, 1), h1 = (0, 1), out = 0 + 1 + 0.5 = 1.5
    const Vector out = network_forward(net, {1.0, 2.0}, false).output();
    CHECK(out[0] == doctest::Approx(1.5));
}
