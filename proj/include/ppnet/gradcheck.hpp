#pragma once

#include <algorithm>
#include <cmath>

#include "ppnet/graph.hpp"

namespace ppnet {

// Central finite-difference verifier for scalar-valued tensor functions.
// f is invoked as f(graph, leaf_id) -> loss node id. Returns the max over
// elements of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Run at f64: f32 rounding would swamp the comparison.
template <class F>
double grad_check(F f, const Tensor<double>& x, double eps = 1e-5) {
    Graph<double> g;
    const int leaf = g.leaf(x);
    const int loss = f(g, leaf);
    if (g.value(loss).size() != 1) throw ContractError("grad_check: f must be scalar-valued");
    g.backward(loss);
    const Tensor<double> analytic = g.grad(leaf);

    auto eval = [&](const Tensor<double>& xv) {
        Graph<double> gg;
        return gg.value(f(gg, gg.leaf(xv))).item();
    };

    double worst = 0.0;
    Tensor<double> xp = x;
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = xp.data[i];
        xp.data[i] = orig + eps;
        const double up = eval(xp);
        xp.data[i] = orig - eps;
        const double dn = eval(xp);
        xp.data[i] = orig;
        const double numeric = (up - dn) / (2.0 * eps);
        const double a = analytic.data[i];
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace ppnet
