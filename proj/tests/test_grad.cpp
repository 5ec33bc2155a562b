#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "cr/data.hpp"
#include "cr/grad.hpp"
#include "cr/polynet.hpp"
#include "cr/rng.hpp"

using namespace cr;

namespace {

Dataset tiny_regression(Rng& rng, std::size_t n, std::size_t d) {
    Dataset ds;
    ds.X = Matrix(n, d);
    ds.targets.resize(n);
    ds.kind = TargetKind::Regression;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ds.X(i, j) = rng.uniform(-1.0, 1.0);
        ds.targets[i] = rng.normal();
    }
    return ds;
}

Dataset tiny_classes(Rng& rng, std::size_t n, std::size_t d, int k) {
    Dataset ds;
    ds.X = Matrix(n, d);
    ds.labels.resize(n);
    ds.kind = TargetKind::Classes;
    ds.num_classes = k;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ds.X(i, j) = rng.uniform(-1.0, 1.0);
        ds.labels[i] = static_cast<int>(rng.below(k));
    }
    return ds;
}

void check_grads_close(const ParamGrads& got, const ParamGrads& want, double rel_tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t l = 0; l < got.size(); ++l) {
        auto check_block = [&](const std::vector<double>& g, const std::vector<double>& w) {
            REQUIRE(g.size() == w.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (std::abs(w[i]) > 1e-6)
                    CHECK(g[i] == doctest::Approx(w[i]).epsilon(rel_tol));
                else
                    CHECK(std::abs(g[i] - w[i]) < 1e-6);
            }
        };
        check_block(got[l].dW.data(), want[l].dW.data());
        check_block(got[l].db, want[l].db);
        check_block(got[l].dalpha.data(), want[l].dalpha.data());
    }
}

}  // namespace

TEST_CASE("backward matches finite differences: mse, each regularizer") {
    Rng rng(31);
    for (const Regularizer reg :
         {Regularizer::none(), Regularizer::dreg(0.01), Regularizer::igpen(0.01),
          Regularizer::spectral_norm(1)}) {
        PolyNetwork net =
            make_network(3, {4}, 1, Activation::Poly, 3, reg, rng, true);
        Dataset ds = tiny_regression(rng, 5, 3);
        const ParamGrads got = backward(net, ds, LossKind::Mse);
        const ParamGrads want = finite_diff_grad(net, ds, LossKind::Mse, 1e-5);
        check_grads_close(got, want, 1e-5);
    }
}

TEST_CASE("backward matches finite differences: cross-entropy + dreg, 2 hidden layers") {
    Rng rng(32);
    PolyNetwork net = make_network(3, {4, 3}, 3, Activation::Poly, 3,
                                   Regularizer::dreg(0.003), rng, true);
    Dataset ds = tiny_classes(rng, 6, 3, 3);
    const ParamGrads got = backward(net, ds, LossKind::CrossEntropy);
    const ParamGrads want = finite_diff_grad(net, ds, LossKind::CrossEntropy, 1e-5);
    check_grads_close(got, want, 1e-5);
}

TEST_CASE("backward matches finite differences: relu and gelu hidden layers") {
    Rng rng(33);
    for (Activation act : {Activation::Relu, Activation::Gelu}) {
        PolyNetwork net =
            make_network(3, {5}, 2, act, 3, Regularizer::dreg(0.01), rng, false);
        Dataset ds = tiny_classes(rng, 5, 3, 2);
        const ParamGrads got = backward(net, ds, LossKind::CrossEntropy);
        const ParamGrads want = finite_diff_grad(net, ds, LossKind::CrossEntropy, 1e-5);
        check_grads_close(got, want, 1e-4);
    }
}

TEST_CASE("closed form: 1-layer linear net, mse gradient is 2/n X^T (Xw - y) pattern") {
    // Scalar linear model y_hat = w x + b on two points; gradient by hand.
    PolyNetwork net;
    net.input_dim = 1;
    PolyLayer l;
    l.W = Matrix(1, 1, {2.0});
    l.b = {1.0};
    l.act = Activation::Linear;
    net.layers = {l};

    Dataset ds;
    ds.X = Matrix(2, 1, {1.0, 2.0});
    ds.targets = {0.0, 1.0};
    ds.kind = TargetKind::Regression;
    // residuals r = (3, 4); L = mean r^2; dL/dw = mean 2 r x = (6 + 16) = 11
    // dL/db = mean 2 r = 7
    const ParamGrads g = backward(net, ds, LossKind::Mse);
    CHECK(g[0].dW(0, 0) == doctest::Approx(11.0).epsilon(1e-12));
    CHECK(g[0].db[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("dreg objective includes lambda * mean penalty") {
    Rng rng(34);
    PolyNetwork net = make_network(2, {3}, 1, Activation::Poly, 3,
                                   Regularizer::dreg(0.5), rng, false);
    Dataset ds = tiny_regression(rng, 4, 2);
    const double with_pen = loss_value(net, ds, LossKind::Mse);
    PolyNetwork plain = net;
    plain.reg = Regularizer::none();
    const double without = loss_value(plain, ds, LossKind::Mse);
    double mean_pen = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        mean_pen += dreg_penalty(network_forward(net, ds.row(i), true).states,
                                 Regularizer::Scope::AllLayers);
    mean_pen /= static_cast<double>(ds.size());
    CHECK(with_pen == doctest::Approx(without + 0.5 * mean_pen).epsilon(1e-12));
}

TEST_CASE("input_gradient matches finite differences in x") {
    Rng rng(35);
    PolyNetwork net = make_network(4, {5}, 3, Activation::Poly, 3,
                                   Regularizer::none(), rng, true);
    Vector x = {0.1, -0.4, 0.7, 0.2};
    const int label = 1;
    const Vector g = input_gradient(net, x, LossKind::CrossEntropy, label, 0.0);
    const double h = 1e-6;
    for (std::size_t j = 0; j < x.size(); ++j) {
        Dataset one;
        one.kind = TargetKind::Classes;
        one.num_classes = 3;
        one.labels = {label};
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        one.X = Matrix(1, 4, xp);
        const double fp = task_loss(net, one, LossKind::CrossEntropy);
        one.X = Matrix(1, 4, xm);
        const double fm = task_loss(net, one, LossKind::CrossEntropy);
        CHECK(g[j] == doctest::Approx((fp - fm) / (2.0 * h)).epsilon(1e-5));
    }
}

TEST_CASE("adam scalar hand trace, first two steps") {
    // Single parameter w = 0, constant gradient 1. Bias-corrected Adam gives
    // step of exactly -lr on step 1.
    PolyNetwork net;
    net.input_dim = 1;
    PolyLayer l;
    l.W = Matrix(1, 1, {0.0});
    l.b = {0.0};
    l.act = Activation::Linear;
    net.layers = {l};

    ParamGrads g = zeros_like(net);
    g[0].dW(0, 0) = 1.0;
    g[0].db[0] = 0.0;

    AdamState st;
    st.m = zeros_like(net);
    st.v = zeros_like(net);
    AdamHyper hp;
    hp.lr = 0.1;

    adam_step(net, g, st, 1, hp);
    // mhat = 1, vhat = 1 -> w = -lr * 1/(1 + eps)
    CHECK(net.layers[0].W(0, 0) ==
          doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    adam_step(net, g, st, 2, hp);
    // still mhat = vhat = 1 for a constant gradient
    CHECK(net.layers[0].W(0, 0) ==
          doctest::Approx(-0.2 / (1.0 + 1e-8)).epsilon(1e-9));
    CHECK(net.layers[0].b[0] == 0.0);
}

TEST_CASE("grads helpers: axpy, scale, global norm, finite check") {
    Rng rng(36);
    PolyNetwork net = make_network(2, {2}, 1, Activation::Poly, 3,
                                   Regularizer::none(), rng, false);
    ParamGrads a = zeros_like(net), b = zeros_like(net);
    a[0].dW(0, 0) = 3.0;
    b[0].dW(0, 0) = 1.0;
    grads_axpy(a, b, 2.0);
    CHECK(a[0].dW(0, 0) == 5.0);
    grads_scale(a, 0.2);
    CHECK(a[0].dW(0, 0) == doctest::Approx(1.0));
    CHECK(grads_global_norm(a) == doctest::Approx(1.0));
    a[1].db[0] = std::nan("");
    CHECK_THROWS_AS(grads_check_finite(a), std::runtime_error);
}

TEST_CASE("train: max_epochs=1 with patience=0 runs exactly one epoch") {
    Rng rng(37);
    PolyNetwork net = make_network(3, {4}, 1, Activation::Poly, 3,
                                   Regularizer::none(), rng, false);
    Dataset tr = tiny_regression(rng, 32, 3), va = tiny_regression(rng, 8, 3);
    TrainConfig tc;
    tc.max_epochs = 1;
    tc.patience = 0;
    tc.batch_size = 8;
    const TrainReport rep = train(net, tr, va, tc, LossKind::Mse);
    CHECK(rep.stopped_epoch == 1);
    CHECK(rep.train_losses.size() == 1);
    CHECK_FALSE(rep.diverged);
}

TEST_CASE("train is deterministic per seed and reduces loss") {
    Rng rng(38);
    Dataset tr = tiny_regression(rng, 64, 3), va = tiny_regression(rng, 16, 3);

    auto run = [&](std::uint64_t seed) {
        Rng r2(99);
        PolyNetwork net = make_network(3, {6}, 1, Activation::Poly, 3,
                                       Regularizer::dreg(0.001), r2, false);
        TrainConfig tc;
        tc.max_epochs = 10;
        tc.seed = seed;
        const TrainReport rep = train(net, tr, va, tc, LossKind::Mse);
        return std::make_pair(net, rep);
    };
    const auto [net_a, rep_a] = run(5);
    const auto [net_b, rep_b] = run(5);
    CHECK(rep_a.train_losses == rep_b.train_losses);
    CHECK(net_a.layers[0].W == net_b.layers[0].W);
    CHECK(rep_a.train_losses.back() < rep_a.train_losses.front());

    const auto [net_c, rep_c] = run(6);
    CHECK(rep_a.train_losses != rep_c.train_losses);
}

TEST_CASE("train restores the best snapshot") {
    Rng rng(39);
    Dataset tr = tiny_regression(rng, 64, 3), va = tiny_regression(rng, 16, 3);
    Rng r2(100);
    PolyNetwork net = make_network(3, {6}, 1, Activation::Poly, 3,
                                   Regularizer::none(), r2, false);
    TrainConfig tc;
    tc.max_epochs = 30;
    tc.patience = 3;
    const TrainReport rep = train(net, tr, va, tc, LossKind::Mse);
    CHECK(rep.best_epoch >= 1);
    CHECK(rep.best_epoch <= rep.stopped_epoch);
    // the restored network reproduces the reported best validation loss
    CHECK(task_loss(net, va, LossKind::Mse) ==
          doctest::Approx(rep.best_val_loss).epsilon(1e-12));
}

TEST_CASE("spectral norm training keeps every sigma at or below one") {
    Rng rng(40);
    Dataset tr = tiny_classes(rng, 64, 4, 3), va = tiny_classes(rng, 16, 4, 3);
    PolyNetwork net = make_network(4, {6, 5}, 3, Activation::Relu, 3,
                                   Regularizer::spectral_norm(1), rng, false);
    TrainConfig tc;
    tc.max_epochs = 5;
    const TrainReport rep = train(net, tr, va, tc, LossKind::CrossEntropy);
    CHECK_FALSE(rep.diverged);
    // audited with long power iteration in test_regularizers; quick bound here
    for (const auto& layer : net.layers) {
        double frob = std::sqrt(frobenius_norm_sq(layer.W));
        // sigma <= ||W||_F always; a tight check happens in the acceptance run
        CHECK(frob < 1e3);
    }
}

TEST_CASE("32-bit precision training changes results but stays finite") {
    Rng rng(41);
    Dataset tr = tiny_regression(rng, 64, 3), va = tiny_regression(rng, 16, 3);
    auto run = [&](int precision) {
        Rng r2(101);
        PolyNetwork net = make_network(3, {5}, 1, Activation::Poly, 3,
                                       Regularizer::none(), r2, false);
        TrainConfig tc;
        tc.max_epochs = 5;
        tc.precision = precision;
        const TrainReport rep = train(net, tr, va, tc, LossKind::Mse);
        return std::make_pair(rep.diverged, rep.train_losses.back());
    };
    const auto [div64, loss64] = run(64);
    const auto [div32, loss32] = run(32);
    CHECK_FALSE(div64);
    CHECK_FALSE(div32);
    CHECK(loss32 == doctest::Approx(loss64).epsilon(1e-2));
    CHECK(loss32 != loss64);
}

TEST_CASE("mse loss requires scalar output") {
    Rng rng(42);
    PolyNetwork net = make_network(3, {4}, 2, Activation::Poly, 3,
                                   Regularizer::none(), rng, false);
    Dataset ds = tiny_regression(rng, 4, 3);
    CHECK_THROWS_AS(loss_value(net, ds, LossKind::Mse), std::logic_error);
}
