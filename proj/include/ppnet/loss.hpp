#pragma once

#include <vector>

#include "ppnet/graph.hpp"

namespace ppnet {

enum class LayerScope { Layer0Only, AllLayersMean };

struct LossConfig {
    double p = 1000.0;
    // Per-step weighting factors, indexed by error ordinal (the first
    // formable error gets lambda_t(0)). Entries beyond the list default to
    // lambda0 for ordinal 0 and 1.0 afterwards.
    std::vector<double> lambda;
    double lambda0 = 0.5;
    bool detach_weight = true;
    LayerScope scope = LayerScope::Layer0Only;

    double lambda_at(size_t i) const {
        if (i < lambda.size()) return lambda[i];
        return i == 0 ? lambda0 : 1.0;
    }
};

// Split error, identical in form to the network's error unit:
// concat[relu(pred - target), relu(target - pred)].
template <class T>
int split_error(Graph<T>& g, int pred, int target) {
    require_same_shape(g.value(pred), g.value(target), "split_error");
    return g.concat_channels(g.relu(g.sub(pred, target)), g.relu(g.sub(target, pred)));
}

// W = p * E, elementwise, on values (the detached weighting path).
template <class T>
Tensor<T> adaptive_weight(const Tensor<T>& e, double p) {
    Tensor<T> w(e.shape);
    for (size_t i = 0; i < e.size(); ++i) w.data[i] = static_cast<T>(p) * e.data[i];
    return w;
}

// One loss term: lambda * mean(W . E) = lambda * p * mean(E^2). With
// detach_weight the weight is a constant, which halves the gradient but not
// the value. p = 0 means no weighting at all: lambda * mean(E).
template <class T>
int loss_term(Graph<T>& g, int err, const LossConfig& cfg) {
    if (cfg.p == 0.0) return g.mean_all(err);
    if (cfg.detach_weight)
        return g.mean_all(g.mul_const(err, adaptive_weight(g.value(err), cfg.p)));
    return g.mean_all(g.mul(err, g.scale(err, static_cast<T>(cfg.p))));
}

// Adaptive-weighted sequence loss: sum over formable steps of
// lambda_t * p * mean(E_t^2). `errors[i]` lists the error nodes of the i-th
// formable step (one entry under Layer0Only; their mean is taken otherwise).
template <class T>
int sequence_loss(Graph<T>& g, const std::vector<std::vector<int>>& errors,
                  const LossConfig& cfg) {
    int total = -1;
    size_t nsteps = 0;
    for (size_t i = 0; i < errors.size(); ++i) {
        if (errors[i].empty()) continue;
        int step_term = -1;
        for (int e : errors[i]) {
            const int term = loss_term(g, e, cfg);
            step_term = step_term < 0 ? term : g.add(step_term, term);
        }
        if (errors[i].size() > 1)
            step_term = g.scale(step_term, T(1) / static_cast<T>(errors[i].size()));
        step_term = g.scale(step_term, static_cast<T>(cfg.lambda_at(nsteps)));
        total = total < 0 ? step_term : g.add(total, step_term);
        ++nsteps;
    }
    if (total < 0) throw ContractError("sequence_loss: no errors supplied");
    return total;
}

}  // namespace ppnet
