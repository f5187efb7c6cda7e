#pragma once

#include <cmath>
#include <optional>

#include "ppnet/graph.hpp"
#include "ppnet/rng.hpp"
#include "ppnet/tensor.hpp"

namespace ppnet {

// Convolutional LSTM cell parameters, gate order (input, forget, cell,
// output), no peephole connections. The top-down prediction, when a higher
// layer exists, enters by channel concatenation with the bottom-up input and
// previous hidden state; the gate equations and this merge are deliberate
// choices documented here because the source architecture leaves both open.
template <class T>
struct ConvLSTMCell {
    Tensor<T> gate_kernel;  // (4*Ch, Cin_total, k, k)
    Tensor<T> gate_bias;    // (4*Ch)

    size_t hidden_channels() const { return gate_kernel.dim(0) / 4; }
    size_t cin_total() const { return gate_kernel.dim(1); }
    size_t kernel_size() const { return gate_kernel.dim(2); }
};

template <class T>
struct ConvLSTMState {
    int h = -1;  // graph node ids, (B,Ch,H,W)
    int c = -1;
};

// Kernel values uniform in +-sqrt(1/(Cin_total*k*k)); forget-gate bias 1.0,
// other biases 0. Deterministic given the rng stream.
template <class T>
ConvLSTMCell<T> init_convlstm(Rng& rng, size_t cin_total, size_t hidden_channels,
                              size_t kernel_size) {
    ConvLSTMCell<T> cell;
    const double bound =
        std::sqrt(1.0 / static_cast<double>(cin_total * kernel_size * kernel_size));
    cell.gate_kernel = Tensor<T>({4 * hidden_channels, cin_total, kernel_size, kernel_size});
    for (auto& w : cell.gate_kernel.data) w = static_cast<T>(rng.uniform(-bound, bound));
    cell.gate_bias = Tensor<T>({4 * hidden_channels});
    for (size_t i = hidden_channels; i < 2 * hidden_channels; ++i) cell.gate_bias.data[i] = T(1);
    return cell;
}

// One recurrent step. `topdown`, when present, must already be upsampled to
// the layer's spatial size. Channel widths are enforced against the gate
// kernel: a cell built without top-down channels rejects a top-down argument
// (omission means a narrower cell, never zero padding).
template <class T>
ConvLSTMState<T> convlstm_step(Graph<T>& g, int gate_kernel, int gate_bias, int input,
                               const ConvLSTMState<T>& prev, std::optional<int> topdown) {
    int z = g.concat_channels(input, prev.h);
    if (topdown) z = g.concat_channels(z, *topdown);
    const Tensor<T>& K = g.value(gate_kernel);
    const size_t cin_total = K.dim(1);
    const size_t ch = K.dim(0) / 4;
    const size_t k = K.dim(2);
    const size_t zc = g.value(z).dim(1);
    if (zc != cin_total)
        throw DimensionError("convlstm_step: cell expects " + std::to_string(cin_total) +
                             " input channels, got " + std::to_string(zc));
    const int gates = g.conv2d(z, gate_kernel, gate_bias, static_cast<int>((k - 1) / 2));
    const int i_gate = g.sigmoid(g.slice_channels(gates, 0, ch));
    const int f_gate = g.sigmoid(g.slice_channels(gates, ch, 2 * ch));
    const int g_gate = g.tanh_(g.slice_channels(gates, 2 * ch, 3 * ch));
    const int o_gate = g.sigmoid(g.slice_channels(gates, 3 * ch, 4 * ch));
    ConvLSTMState<T> next;
    next.c = g.add(g.mul(f_gate, prev.c), g.mul(i_gate, g_gate));
    next.h = g.mul(o_gate, g.tanh_(next.c));
    return next;
}

}  // namespace ppnet
