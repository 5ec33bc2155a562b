#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "cr/data.hpp"
#include "cr/polynet.hpp"
#include "cr/rng.hpp"
#include "cr/sensitivity.hpp"

using namespace cr;

TEST_CASE("percentile: linear interpolation between closest ranks") {
    std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 100.0) == 10.0);
    CHECK(percentile(v, 50.0) == doctest::Approx(5.5));
    // pos = 0.95 * 9 = 8.55 -> 9 + 0.55 * (10 - 9)
    CHECK(percentile(v, 95.0) == doctest::Approx(9.55));
    CHECK(percentile(v, 99.0) == doctest::Approx(9.91));
    // order of the input must not matter
    std::vector<double> shuffled = {7, 1, 10, 3, 5, 9, 2, 8, 6, 4};
    CHECK(percentile(shuffled, 95.0) == doctest::Approx(9.55));
    // single element
    CHECK(percentile({42.0}, 37.0) == 42.0);
}

TEST_CASE("percentile is monotone in q") {
    Rng rng(61);
    std::vector<double> v(37);
    for (double& x : v) x = rng.normal();
    double prev = percentile(v, 0.0);
    for (double q = 1.0; q <= 100.0; q += 1.0) {
        const double cur = percentile(v, q);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("summarize computes the tail ratio") {
    const std::vector<double> norms = {1.0, 1.0, 1.0, 1.0};
    const SensitivityReport r = summarize(norms, IgSource::LossGrad);
    CHECK(r.mean == 1.0);
    CHECK(r.p99 == 1.0);
    CHECK(r.tail_ratio == 1.0);
    CHECK(r.n_samples == 4);
}

TEST_CASE("golden tail ratio from published summary stats") {
    // mean 0.169, p99 3.006 -> 17.79
    CHECK(3.006 / 0.169 == doctest::Approx(17.79).epsilon(0.0006));
}

TEST_CASE("efficiency KPI goldens and domain error") {
    CHECK(efficiency_kpi(85.30, 294106) == doctest::Approx(15.598).epsilon(1e-4));
    CHECK(efficiency_kpi(83.67, 294106) == doctest::Approx(15.300).epsilon(1e-4));
    CHECK_THROWS_AS(efficiency_kpi(50.0, 9), std::invalid_argument);
    CHECK_NOTHROW(efficiency_kpi(50.0, 10));
}

TEST_CASE("pareto distance: documented raw-scale formula") {
    CHECK(pareto_distance(1.0, 5.0, 5.0) == 0.0);
    CHECK(pareto_distance(0.9672, 19.22, 8.07) ==
          doctest::Approx(std::sqrt(0.0328 * 0.0328 + 11.15 * 11.15)).epsilon(1e-9));
    // dominated point is farther
    CHECK(pareto_distance(0.9, 12.0, 8.0) > pareto_distance(0.95, 10.0, 8.0));
}

TEST_CASE("chain bound holds on random nets; single layer is an equality") {
    Rng rng(62);
    for (int trial = 0; trial < 20; ++trial) {
        PolyNetwork net = make_network(3, {4, 3}, 2, Activation::Poly, 3,
                                       Regularizer::none(), rng, true);
        Vector x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const ChainCheck cc = lipschitz_chain_check(net, x);
        CHECK(cc.lhs <= cc.rhs * (1.0 + 1e-12));
    }
    // one hidden... no: exactly one layer total (linear readout), S = W
    for (int trial = 0; trial < 5; ++trial) {
        PolyNetwork net = make_network(4, {}, 3, Activation::Poly, 3,
                                       Regularizer::none(), rng, false);
        Vector x = {0.1, 0.2, -0.3, 0.4};
        const ChainCheck cc = lipschitz_chain_check(net, x);
        CHECK(std::abs(cc.lhs - cc.rhs) < 1e-10);
    }
}

TEST_CASE("input gradient norms: loss-grad source vs jacobian source") {
    Rng rng(63);
    SyntheticFamily spec;
    spec.kind = FamilyKind::Smooth;
    spec.dim = 4;
    spec.n = 16;
    spec.seed = 8;
    const Dataset ds = gen_synthetic(spec);
    PolyNetwork net = make_network(4, {5}, 1, Activation::Poly, 3,
                                   Regularizer::none(), rng, false);
    const auto lg = input_gradient_norms(net, ds, IgSource::LossGrad);
    const auto jf = input_gradient_norms(net, ds, IgSource::OutputJacobianFro);
    REQUIRE(lg.size() == 16);
    REQUIRE(jf.size() == 16);
    for (double v : lg) CHECK(v >= 0.0);
    // scalar output: jacobian-frobenius source equals ||dy/dx||
    for (std::size_t i = 0; i < 16; ++i) {
        const Matrix S = network_forward(net, ds.row(i), true).jacobian();
        CHECK(jf[i] == doctest::Approx(std::sqrt(frobenius_norm_sq(S))).epsilon(1e-12));
    }
}
