#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppnet/loss.hpp"
#include "ppnet/rng.hpp"

using namespace ppnet;

TEST_CASE("split_error definitions") {
    Graph<double> g;
    const int p = g.constant(TensorD({1, 1, 1, 1}, {0.9}));
    const int t = g.constant(TensorD({1, 1, 1, 1}, {0.2}));
    const TensorD& e = g.value(split_error(g, p, t));
    CHECK(e.data[0] == doctest::Approx(0.7));
    CHECK(e.data[1] == 0.0);

    for (double v : g.value(split_error(g, t, t)).data) CHECK(v == 0.0);

    Rng rng(1);
    TensorD pv({1, 3, 4, 4}), tv({1, 3, 4, 4});
    for (auto& v : pv.data) v = rng.next_double();
    for (auto& v : tv.data) v = rng.next_double();
    const TensorD& er = g.value(split_error(g, g.constant(pv), g.constant(tv)));
    for (size_t i = 0; i < pv.size(); ++i)
        CHECK(er.data[i] + er.data[pv.size() + i] == std::abs(pv.data[i] - tv.data[i]));
}

TEST_CASE("adaptive_weight arithmetic") {
    TensorD e({3}, {0.01, 0.0, 0.5});
    const TensorD w = adaptive_weight(e, 1000.0);
    CHECK(w.data[0] == doctest::Approx(10.0));
    CHECK(w.data[1] == 0.0);
    CHECK(w.data[2] == doctest::Approx(500.0));
}

TEST_CASE("single step, E uniform 0.1, p=1e3, lambda=1 -> L = 10") {
    Graph<double> g;
    LossConfig cfg;
    cfg.p = 1000.0;
    cfg.lambda = {1.0};
    const int e = g.constant(TensorD::full({1, 2, 4, 4}, 0.1));
    CHECK(g.value(sequence_loss(g, {{e}}, cfg)).item() == doctest::Approx(10.0));
}

TEST_CASE("threshold: weighted contribution crosses raw exactly at e = 1/p") {
    for (double p : {2.0, 1e3, 1e4}) {
        const double e = 1.0 / p;
        CHECK(std::abs(p * e * e - e) < 1e-12);  // equality at the crossover
        const double above = e * 1.5, below = e * 0.5;
        CHECK(p * above * above > above);
        CHECK(p * below * below < below);
    }
}

TEST_CASE("lambda0 halves the first formable error's contribution") {
    Graph<double> g;
    LossConfig cfg;
    cfg.p = 100.0;
    const int e = g.constant(TensorD::full({1, 2, 2, 2}, 0.2));
    // two identical steps: first weighted 0.5, second 1.0
    const double loss = g.value(sequence_loss(g, {{e}, {e}}, cfg)).item();
    const double one = 100.0 * 0.04;
    CHECK(loss == doctest::Approx(0.5 * one + 1.0 * one));
    CHECK(cfg.lambda_at(0) == 0.5);
    CHECK(cfg.lambda_at(1) == 1.0);
    CHECK(cfg.lambda_at(7) == 1.0);
}

TEST_CASE("p=0 special case: unweighted raw error") {
    Graph<double> g;
    LossConfig cfg;
    cfg.p = 0.0;
    cfg.lambda = {1.0};
    const int e = g.constant(TensorD::full({4}, 0.1));
    CHECK(g.value(sequence_loss(g, {{e}}, cfg)).item() == doctest::Approx(0.1));
}

TEST_CASE("monotonicity: raising one error element never lowers the loss") {
    Rng rng(3);
    TensorD ev({1, 2, 3, 3});
    for (auto& v : ev.data) v = rng.next_double();
    LossConfig cfg;
    cfg.p = 1000.0;
    auto loss_of = [&](const TensorD& e) {
        Graph<double> g;
        return g.value(sequence_loss(g, {{g.constant(e)}}, cfg)).item();
    };
    const double base = loss_of(ev);
    for (size_t i = 0; i < ev.size(); ++i) {
        TensorD up = ev;
        up.data[i] += 0.1;
        CHECK(loss_of(up) >= base);
    }
}

TEST_CASE("gradient sign follows (pred - target)") {
    Rng rng(5);
    TensorD pv({1, 1, 3, 3}), tv({1, 1, 3, 3});
    for (auto& v : pv.data) v = rng.next_double();
    for (auto& v : tv.data) v = rng.next_double();
    for (bool detach : {true, false}) {
        LossConfig cfg;
        cfg.p = 1000.0;
        cfg.lambda = {1.0};
        cfg.detach_weight = detach;
        Graph<double> g;
        const int pred = g.leaf(pv);
        const int err = split_error(g, pred, g.constant(tv));
        g.backward(sequence_loss(g, {{err}}, cfg));
        const TensorD& gr = g.grad(pred);
        for (size_t i = 0; i < pv.size(); ++i) {
            const double d = pv.data[i] - tv.data[i];
            if (d != 0.0) CHECK(gr.data[i] * d > 0.0);
        }
    }
}

TEST_CASE("p=1 detached equals the mean-square form") {
    Rng rng(7);
    TensorD pv({1, 1, 4, 4}), tv({1, 1, 4, 4});
    for (auto& v : pv.data) v = rng.next_double();
    for (auto& v : tv.data) v = rng.next_double();
    LossConfig cfg;
    cfg.p = 1.0;
    cfg.lambda = {1.0};
    Graph<double> g;
    const int err = split_error(g, g.constant(pv), g.constant(tv));
    const double loss = g.value(sequence_loss(g, {{err}}, cfg)).item();
    // split error doubles the element count: mean over 2N elements of e^2
    // where exactly N entries are |pred-target| and N are zero
    double mse = 0;
    for (size_t i = 0; i < pv.size(); ++i) {
        const double d = pv.data[i] - tv.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(2 * pv.size());
    CHECK(loss == doctest::Approx(mse).epsilon(1e-12));
}

TEST_CASE("detach only changes gradients, never the value") {
    Rng rng(9);
    TensorD pv({2, 1, 2, 2}), tv({2, 1, 2, 2});
    for (auto& v : pv.data) v = rng.next_double();
    for (auto& v : tv.data) v = rng.next_double();
    double vals[2];
    TensorD grads[2] = {TensorD({1}), TensorD({1})};
    for (int i = 0; i < 2; ++i) {
        LossConfig cfg;
        cfg.p = 50.0;
        cfg.detach_weight = i == 0;
        Graph<double> g;
        const int pred = g.leaf(pv);
        const int loss = sequence_loss(g, {{split_error(g, pred, g.constant(tv))}}, cfg);
        vals[i] = g.value(loss).item();
        g.backward(loss);
        grads[i] = g.grad(pred);
    }
    CHECK(vals[0] == doctest::Approx(vals[1]).epsilon(1e-12));
    // non-detached gradient is exactly twice the detached one
    for (size_t i = 0; i < grads[0].size(); ++i)
        CHECK(grads[1].data[i] == doctest::Approx(2.0 * grads[0].data[i]).epsilon(1e-9));
}

TEST_CASE("all-layers scope averages per step; empty list rejected") {
    Graph<double> g;
    LossConfig cfg;
    cfg.p = 10.0;
    cfg.lambda = {1.0};
    cfg.scope = LayerScope::AllLayersMean;
    const int e1 = g.constant(TensorD::full({2, 2}, 0.1));
    const int e2 = g.constant(TensorD::full({2, 2}, 0.3));
    const double loss = g.value(sequence_loss(g, {{e1, e2}}, cfg)).item();
    CHECK(loss == doctest::Approx(0.5 * (10 * 0.01 + 10 * 0.09)));
    CHECK_THROWS_AS(sequence_loss(g, {}, cfg), ContractError);
}
