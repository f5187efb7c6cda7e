#pragma once

#include <cmath>
#include <functional>
#include <type_traits>
#include <utility>
#include <vector>

#include "ppnet/kernels.hpp"
#include "ppnet/kernels_ref.hpp"
#include "ppnet/tensor.hpp"

namespace ppnet {

// Reverse-mode tape. Nodes are identified by index; the tape is created in
// topological order, so backward is a single reverse sweep. One graph is
// built per forward pass and owned by one logical thread.
//
// f32 arithmetic goes through the runtime-dispatched kernels; every other
// precision (f64 for gradient checks) uses the scalar reference kernels.
namespace detail {

template <class T>
inline void k_conv2d_fwd(const T* in, size_t B, size_t Cin, size_t H, size_t W, const T* K,
                         size_t Cout, size_t k, size_t pad, const T* bias, T* out) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().conv2d_fwd(in, B, Cin, H, W, K, Cout, k, pad, bias, out);
    else
        kern::conv2d_fwd_ref(in, B, Cin, H, W, K, Cout, k, pad, bias, out);
}
template <class T>
inline void k_conv2d_bwd_input(const T* gout, size_t B, size_t Cin, size_t H, size_t W,
                               const T* K, size_t Cout, size_t k, size_t pad, T* gin) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().conv2d_bwd_input(gout, B, Cin, H, W, K, Cout, k, pad, gin);
    else
        kern::conv2d_bwd_input_ref(gout, B, Cin, H, W, K, Cout, k, pad, gin);
}
template <class T>
inline void k_conv2d_bwd_kernel(const T* gout, const T* in, size_t B, size_t Cin, size_t H,
                                size_t W, size_t Cout, size_t k, size_t pad, T* gK) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().conv2d_bwd_kernel(gout, in, B, Cin, H, W, Cout, k, pad, gK);
    else
        kern::conv2d_bwd_kernel_ref(gout, in, B, Cin, H, W, Cout, k, pad, gK);
}
template <class T>
inline void k_add(const T* a, const T* b, T* o, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().add(a, b, o, n);
    else
        kern::add_ref(a, b, o, n);
}
template <class T>
inline void k_sub(const T* a, const T* b, T* o, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().sub(a, b, o, n);
    else
        kern::sub_ref(a, b, o, n);
}
template <class T>
inline void k_mul(const T* a, const T* b, T* o, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().mul(a, b, o, n);
    else
        kern::mul_ref(a, b, o, n);
}
template <class T>
inline void k_scale(const T* a, T s, T* o, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().scale(a, s, o, n);
    else
        kern::scale_ref(a, s, o, n);
}
template <class T>
inline void k_axpy(T a, const T* x, T* y, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().axpy(a, x, y, n);
    else
        kern::axpy_ref(a, x, y, n);
}
template <class T>
inline void k_acc_mul(const T* a, const T* b, T* d, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().acc_mul(a, b, d, n);
    else
        kern::acc_mul_ref(a, b, d, n);
}
template <class T>
inline void k_relu(const T* a, T* o, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().relu(a, o, n);
    else
        kern::relu_ref(a, o, n);
}
template <class T>
inline void k_relu_bwd(const T* x, const T* g, T* gi, size_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::active().relu_bwd(x, g, gi, n);
    else
        kern::relu_bwd_ref(x, g, gi, n);
}

}  // namespace detail

template <class T>
class Graph {
  public:
    int leaf(Tensor<T> v) { return push(std::move(v), true, {}); }
    int constant(Tensor<T> v) { return push(std::move(v), false, {}); }

    const Tensor<T>& value(int id) const { return nodes_[id].value; }
    Tensor<T>& mutable_value(int id) { return nodes_[id].value; }

    // Zero tensor of the node's shape when the node was never reached.
    const Tensor<T>& grad(int id) const {
        static const Tensor<T> empty;
        if (nodes_[id].grad.shape != nodes_[id].value.shape) {
            zero_grads_.push_back(Tensor<T>::zeros(nodes_[id].value.shape));
            return zero_grads_.back();
        }
        return nodes_[id].grad;
    }

    size_t num_nodes() const { return nodes_.size(); }

    // --- differentiable operations -----------------------------------------

    int conv2d(int x, int kernel, int bias, int pad) {
        const Tensor<T>& in = value(x);
        const Tensor<T>& K = value(kernel);
        const Tensor<T>& bv = value(bias);
        if (in.rank() != 4 || K.rank() != 4)
            throw DimensionError("conv2d: expected 4-D input and kernel");
        const size_t B = in.dim(0), Cin = in.dim(1), H = in.dim(2), W = in.dim(3);
        const size_t Cout = K.dim(0), k = K.dim(2);
        if (K.dim(3) != k || k % 2 == 0) throw DimensionError("conv2d: kernel must be square, odd");
        if (K.dim(1) != Cin)
            throw DimensionError("conv2d: kernel expects " + std::to_string(K.dim(1)) +
                                 " input channels, got " + std::to_string(Cin));
        if (bv.size() != Cout) throw DimensionError("conv2d: bias length mismatch");
        const size_t p = static_cast<size_t>(pad);
        if (H + 2 * p < k || W + 2 * p < k) throw DimensionError("conv2d: input smaller than kernel");
        const size_t Ho = H + 2 * p - k + 1, Wo = W + 2 * p - k + 1;
        Tensor<T> out({B, Cout, Ho, Wo});
        detail::k_conv2d_fwd(in.data.data(), B, Cin, H, W, K.data.data(), Cout, k, p,
                             bv.data.data(), out.data.data());
        if (!out.all_finite()) throw NumericError("conv2d: non-finite output");
        return push(std::move(out), needs(x) || needs(kernel) || needs(bias),
                    [x, kernel, bias, B, Cin, H, W, Cout, k, p](Graph& g, int self) {
                        const Tensor<T>& go = g.nodes_[self].grad;
                        if (g.needs(x))
                            detail::k_conv2d_bwd_input(go.data.data(), B, Cin, H, W,
                                                       g.value(kernel).data.data(), Cout, k, p,
                                                       g.grad_buf(x).data.data());
                        if (g.needs(kernel))
                            detail::k_conv2d_bwd_kernel(go.data.data(), g.value(x).data.data(), B,
                                                        Cin, H, W, Cout, k, p,
                                                        g.grad_buf(kernel).data.data());
                        if (g.needs(bias))
                            kern::conv2d_bwd_bias_ref(go.data.data(), B, Cout, go.dim(2), go.dim(3),
                                                      g.grad_buf(bias).data.data());
                    });
    }

    int maxpool2d(int x, size_t window = 2) {
        const Tensor<T>& in = value(x);
        if (in.rank() != 4) throw DimensionError("maxpool2d: expected 4-D input");
        const size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
        if (H % window || W % window)
            throw DimensionError("maxpool2d: spatial dims " + in.shape_str() +
                                 " not divisible by window " + std::to_string(window));
        const size_t Ho = H / window, Wo = W / window;
        Tensor<T> out({B, C, Ho, Wo});
        // argmax positions, first occurrence in row-major window order
        std::vector<size_t> arg(out.size());
        size_t o = 0;
        for (size_t b = 0; b < B; ++b)
            for (size_t c = 0; c < C; ++c) {
                const T* plane = in.data.data() + (b * C + c) * H * W;
                for (size_t y = 0; y < Ho; ++y)
                    for (size_t xo = 0; xo < Wo; ++xo, ++o) {
                        size_t best = (y * window) * W + xo * window;
                        T bv = plane[best];
                        for (size_t wy = 0; wy < window; ++wy)
                            for (size_t wx = 0; wx < window; ++wx) {
                                const size_t idx = (y * window + wy) * W + (xo * window + wx);
                                if (plane[idx] > bv) {
                                    bv = plane[idx];
                                    best = idx;
                                }
                            }
                        out.data[o] = bv;
                        arg[o] = (b * C + c) * H * W + best;
                    }
            }
        return push(std::move(out), needs(x),
                    [x, arg = std::move(arg)](Graph& g, int self) {
                        if (!g.needs(x)) return;
                        const Tensor<T>& go = g.nodes_[self].grad;
                        Tensor<T>& gi = g.grad_buf(x);
                        for (size_t i = 0; i < arg.size(); ++i) gi.data[arg[i]] += go.data[i];
                    });
    }

    int upsample_nearest(int x, size_t factor = 2) {
        const Tensor<T>& in = value(x);
        if (in.rank() != 4) throw DimensionError("upsample_nearest: expected 4-D input");
        if (factor < 1) throw ContractError("upsample_nearest: factor must be >= 1");
        const size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
        Tensor<T> out({B, C, H * factor, W * factor});
        for (size_t bc = 0; bc < B * C; ++bc) {
            const T* ip = in.data.data() + bc * H * W;
            T* op = out.data.data() + bc * H * factor * W * factor;
            for (size_t y = 0; y < H * factor; ++y)
                for (size_t xx = 0; xx < W * factor; ++xx)
                    op[y * W * factor + xx] = ip[(y / factor) * W + xx / factor];
        }
        return push(std::move(out), needs(x), [x, factor, B, C, H, W](Graph& g, int self) {
            if (!g.needs(x)) return;
            const Tensor<T>& go = g.nodes_[self].grad;
            Tensor<T>& gi = g.grad_buf(x);
            const size_t Wo = W * factor;
            for (size_t bc = 0; bc < B * C; ++bc) {
                const T* gp = go.data.data() + bc * H * factor * Wo;
                T* ip = gi.data.data() + bc * H * W;
                for (size_t y = 0; y < H * factor; ++y)
                    for (size_t xx = 0; xx < Wo; ++xx)
                        ip[(y / factor) * W + xx / factor] += gp[y * Wo + xx];
            }
        });
    }

    int relu(int x) {
        const Tensor<T>& in = value(x);
        Tensor<T> out(in.shape);
        detail::k_relu(in.data.data(), out.data.data(), in.size());
        return push(std::move(out), needs(x), [x](Graph& g, int self) {
            if (!g.needs(x)) return;
            detail::k_relu_bwd(g.value(x).data.data(), g.nodes_[self].grad.data.data(),
                               g.grad_buf(x).data.data(), g.value(x).size());
        });
    }

    int sigmoid(int x) {
        const Tensor<T>& in = value(x);
        Tensor<T> out(in.shape);
        for (size_t i = 0; i < in.size(); ++i)
            out.data[i] = T(1) / (T(1) + std::exp(-in.data[i]));
        return push(std::move(out), needs(x), [x](Graph& g, int self) {
            if (!g.needs(x)) return;
            const Tensor<T>& y = g.value(self);
            const Tensor<T>& go = g.nodes_[self].grad;
            Tensor<T>& gi = g.grad_buf(x);
            for (size_t i = 0; i < y.size(); ++i)
                gi.data[i] += go.data[i] * y.data[i] * (T(1) - y.data[i]);
        });
    }

    int tanh_(int x) {
        const Tensor<T>& in = value(x);
        Tensor<T> out(in.shape);
        for (size_t i = 0; i < in.size(); ++i) out.data[i] = std::tanh(in.data[i]);
        return push(std::move(out), needs(x), [x](Graph& g, int self) {
            if (!g.needs(x)) return;
            const Tensor<T>& y = g.value(self);
            const Tensor<T>& go = g.nodes_[self].grad;
            Tensor<T>& gi = g.grad_buf(x);
            for (size_t i = 0; i < y.size(); ++i)
                gi.data[i] += go.data[i] * (T(1) - y.data[i] * y.data[i]);
        });
    }

    int clamp01(int x) {
        const Tensor<T>& in = value(x);
        Tensor<T> out(in.shape);
        for (size_t i = 0; i < in.size(); ++i)
            out.data[i] = in.data[i] < T(0) ? T(0) : (in.data[i] > T(1) ? T(1) : in.data[i]);
        return push(std::move(out), needs(x), [x](Graph& g, int self) {
            if (!g.needs(x)) return;
            const Tensor<T>& in = g.value(x);
            const Tensor<T>& go = g.nodes_[self].grad;
            Tensor<T>& gi = g.grad_buf(x);
            for (size_t i = 0; i < in.size(); ++i)
                if (in.data[i] > T(0) && in.data[i] < T(1)) gi.data[i] += go.data[i];
        });
    }

    int add(int a, int b) {
        require_same_shape(value(a), value(b), "add");
        Tensor<T> out(value(a).shape);
        detail::k_add(value(a).data.data(), value(b).data.data(), out.data.data(), out.size());
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.nodes_[self].grad;
            if (g.needs(a)) detail::k_axpy(T(1), go.data.data(), g.grad_buf(a).data.data(), go.size());
            if (g.needs(b)) detail::k_axpy(T(1), go.data.data(), g.grad_buf(b).data.data(), go.size());
        });
    }

    int sub(int a, int b) {
        require_same_shape(value(a), value(b), "sub");
        Tensor<T> out(value(a).shape);
        detail::k_sub(value(a).data.data(), value(b).data.data(), out.data.data(), out.size());
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.nodes_[self].grad;
            if (g.needs(a)) detail::k_axpy(T(1), go.data.data(), g.grad_buf(a).data.data(), go.size());
            if (g.needs(b)) detail::k_axpy(T(-1), go.data.data(), g.grad_buf(b).data.data(), go.size());
        });
    }

    int mul(int a, int b) {
        require_same_shape(value(a), value(b), "mul");
        Tensor<T> out(value(a).shape);
        detail::k_mul(value(a).data.data(), value(b).data.data(), out.data.data(), out.size());
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.nodes_[self].grad;
            if (g.needs(a))
                detail::k_acc_mul(go.data.data(), g.value(b).data.data(),
                                  g.grad_buf(a).data.data(), go.size());
            if (g.needs(b))
                detail::k_acc_mul(go.data.data(), g.value(a).data.data(),
                                  g.grad_buf(b).data.data(), go.size());
        });
    }

    int scale(int x, T s) {
        Tensor<T> out(value(x).shape);
        detail::k_scale(value(x).data.data(), s, out.data.data(), out.size());
        return push(std::move(out), needs(x), [x, s](Graph& g, int self) {
            if (!g.needs(x)) return;
            detail::k_axpy(s, g.nodes_[self].grad.data.data(), g.grad_buf(x).data.data(),
                           g.nodes_[self].grad.size());
        });
    }

    // Elementwise product with a constant tensor; gradient flows to x only.
    // This is how detached adaptive weights enter the loss.
    int mul_const(int x, Tensor<T> c) {
        require_same_shape(value(x), c, "mul_const");
        Tensor<T> out(c.shape);
        detail::k_mul(value(x).data.data(), c.data.data(), out.data.data(), out.size());
        return push(std::move(out), needs(x), [x, c = std::move(c)](Graph& g, int self) {
            if (!g.needs(x)) return;
            detail::k_acc_mul(g.nodes_[self].grad.data.data(), c.data.data(),
                              g.grad_buf(x).data.data(), c.size());
        });
    }

    int concat_channels(int a, int b) {
        const Tensor<T>& ta = value(a);
        const Tensor<T>& tb = value(b);
        if (ta.rank() != 4 || tb.rank() != 4 || ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) ||
            ta.dim(3) != tb.dim(3))
            throw DimensionError("concat_channels: non-channel dims differ, " + ta.shape_str() +
                                 " vs " + tb.shape_str());
        const size_t B = ta.dim(0), Ca = ta.dim(1), Cb = tb.dim(1), HW = ta.dim(2) * ta.dim(3);
        Tensor<T> out({B, Ca + Cb, ta.dim(2), ta.dim(3)});
        for (size_t bb = 0; bb < B; ++bb) {
            std::copy_n(ta.data.data() + bb * Ca * HW, Ca * HW,
                        out.data.data() + bb * (Ca + Cb) * HW);
            std::copy_n(tb.data.data() + bb * Cb * HW, Cb * HW,
                        out.data.data() + bb * (Ca + Cb) * HW + Ca * HW);
        }
        return push(std::move(out), needs(a) || needs(b), [a, b, B, Ca, Cb, HW](Graph& g, int self) {
            const Tensor<T>& go = g.nodes_[self].grad;
            for (size_t bb = 0; bb < B; ++bb) {
                const T* gp = go.data.data() + bb * (Ca + Cb) * HW;
                if (g.needs(a))
                    detail::k_axpy(T(1), gp, g.grad_buf(a).data.data() + bb * Ca * HW, Ca * HW);
                if (g.needs(b))
                    detail::k_axpy(T(1), gp + Ca * HW, g.grad_buf(b).data.data() + bb * Cb * HW,
                                   Cb * HW);
            }
        });
    }

    int slice_channels(int x, size_t c0, size_t c1) {
        const Tensor<T>& in = value(x);
        if (in.rank() != 4 || c1 > in.dim(1) || c0 >= c1)
            throw DimensionError("slice_channels: bad channel range");
        const size_t B = in.dim(0), C = in.dim(1), HW = in.dim(2) * in.dim(3);
        Tensor<T> out({B, c1 - c0, in.dim(2), in.dim(3)});
        for (size_t bb = 0; bb < B; ++bb)
            std::copy_n(in.data.data() + (bb * C + c0) * HW, (c1 - c0) * HW,
                        out.data.data() + bb * (c1 - c0) * HW);
        return push(std::move(out), needs(x), [x, c0, c1, B, C, HW](Graph& g, int self) {
            if (!g.needs(x)) return;
            const Tensor<T>& go = g.nodes_[self].grad;
            for (size_t bb = 0; bb < B; ++bb)
                detail::k_axpy(T(1), go.data.data() + bb * (c1 - c0) * HW,
                               g.grad_buf(x).data.data() + (bb * C + c0) * HW, (c1 - c0) * HW);
        });
    }

    int mean_all(int x) {
        const Tensor<T>& in = value(x);
        const size_t n = in.size();
        Tensor<T> out = Tensor<T>::scalar(static_cast<T>(kern::sum_ref(in.data.data(), n) /
                                                         static_cast<double>(n)));
        return push(std::move(out), needs(x), [x, n](Graph& g, int self) {
            if (!g.needs(x)) return;
            const T gval = g.nodes_[self].grad.data[0] / static_cast<T>(n);
            Tensor<T>& gi = g.grad_buf(x);
            for (size_t i = 0; i < n; ++i) gi.data[i] += gval;
        });
    }

    // --- backward ------------------------------------------------------------

    void backward(int loss) {
        if (value(loss).size() != 1)
            throw ContractError("backward: loss must be scalar, got " + value(loss).shape_str());
        grad_buf(loss).data[0] = T(1);
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.need_grad || !n.back || n.grad.shape != n.value.shape) continue;
            n.back(*this, i);
        }
    }

    bool needs(int id) const { return nodes_[id].need_grad; }

    Tensor<T>& grad_buf(int id) {
        Node& n = nodes_[id];
        if (n.grad.shape != n.value.shape) n.grad = Tensor<T>::zeros(n.value.shape);
        return n.grad;
    }

  private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // allocated lazily; shape mismatch means "not yet touched"
        bool need_grad = false;
        std::function<void(Graph&, int)> back;
    };

    int push(Tensor<T> v, bool need_grad, std::function<void(Graph&, int)> back) {
        Node n;
        n.value = std::move(v);
        n.grad = Tensor<T>::scalar(T(0));
        n.grad.shape = {0};  // sentinel: never matches a real value shape
        n.need_grad = need_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    mutable std::vector<Tensor<T>> zero_grads_;
};

}  // namespace ppnet
