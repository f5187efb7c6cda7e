#pragma once

#include <cmath>
#include <cstddef>

// Reference kernels. These are the semantic definition of every hot loop;
// the f32 SIMD backends in src/ must agree with them (bit-exactly for the
// ops whose accumulation order they preserve, see tests/test_kernels.cpp).
//
// Convolution is cross-correlation: no kernel flip.
// Layouts: input (B,Cin,H,W), kernel (Cout,Cin,k,k), output (B,Cout,Ho,Wo),
// all row-major contiguous. Ho = H + 2*pad - k + 1.

namespace ppnet::kern {

inline size_t conv_out_dim(size_t in, size_t k, size_t pad) { return in + 2 * pad - k + 1; }

template <class T>
void conv2d_fwd_ref(const T* in, size_t B, size_t Cin, size_t H, size_t W, const T* K,
                    size_t Cout, size_t k, size_t pad, const T* bias, T* out) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            T* op = out + (b * Cout + co) * Ho * Wo;
            const T bv = bias ? bias[co] : T(0);
            for (size_t i = 0; i < Ho * Wo; ++i) op[i] = bv;
            for (size_t ci = 0; ci < Cin; ++ci) {
                const T* ip = in + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const T w = K[((co * Cin + ci) * k + ky) * k + kx];
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        for (size_t y = y0; y < y1; ++y) {
                            const T* irow = ip + (y + ky - pad) * W + kx - pad;
                            T* orow = op + y * Wo;
                            for (size_t x = x0; x < x1; ++x) orow[x] += w * irow[x];
                        }
                    }
                }
            }
        }
    }
}

// Accumulates into gin (callers pass zero-initialized gradients).
template <class T>
void conv2d_bwd_input_ref(const T* gout, size_t B, size_t Cin, size_t H, size_t W, const T* K,
                          size_t Cout, size_t k, size_t pad, T* gin) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            const T* gp = gout + (b * Cout + co) * Ho * Wo;
            for (size_t ci = 0; ci < Cin; ++ci) {
                T* ip = gin + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const T w = K[((co * Cin + ci) * k + ky) * k + kx];
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        for (size_t y = y0; y < y1; ++y) {
                            T* irow = ip + (y + ky - pad) * W + kx - pad;
                            const T* grow = gp + y * Wo;
                            for (size_t x = x0; x < x1; ++x) irow[x] += w * grow[x];
                        }
                    }
                }
            }
        }
    }
}

// Accumulates into gK.
template <class T>
void conv2d_bwd_kernel_ref(const T* gout, const T* in, size_t B, size_t Cin, size_t H, size_t W,
                           size_t Cout, size_t k, size_t pad, T* gK) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            const T* gp = gout + (b * Cout + co) * Ho * Wo;
            for (size_t ci = 0; ci < Cin; ++ci) {
                const T* ip = in + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        T acc = 0;
                        for (size_t y = y0; y < y1; ++y) {
                            const T* irow = ip + (y + ky - pad) * W + kx - pad;
                            const T* grow = gp + y * Wo;
                            for (size_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                        }
                        gK[((co * Cin + ci) * k + ky) * k + kx] += acc;
                    }
                }
            }
        }
    }
}

// Accumulates into gbias.
template <class T>
void conv2d_bwd_bias_ref(const T* gout, size_t B, size_t Cout, size_t Ho, size_t Wo, T* gbias) {
    for (size_t b = 0; b < B; ++b)
        for (size_t co = 0; co < Cout; ++co) {
            const T* gp = gout + (b * Cout + co) * Ho * Wo;
            T acc = 0;
            for (size_t i = 0; i < Ho * Wo; ++i) acc += gp[i];
            gbias[co] += acc;
        }
}

template <class T>
void add_ref(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
template <class T>
void sub_ref(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
template <class T>
void mul_ref(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
template <class T>
void scale_ref(const T* a, T s, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
// y += a*x
template <class T>
void axpy_ref(T a, const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
// dst += a*b
template <class T>
void acc_mul_ref(const T* a, const T* b, T* dst, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}
template <class T>
void relu_ref(const T* a, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
}
// gin += g where x > 0
template <class T>
void relu_bwd_ref(const T* x, const T* g, T* gin, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] > T(0)) gin[i] += g[i];
}

// Adaptive-moment update with bias correction already folded into bc1/bc2
// (bc = 1 - beta^t). Deterministic, elementwise.
template <class T>
void adam_ref(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2, T eps, T bc1, T bc2) {
    for (size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * (g[i] * g[i]);
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Sum in a fixed left-to-right order with a double accumulator; used by
// mean_all so reductions stay deterministic regardless of backend.
template <class T>
double sum_ref(const T* a, size_t n) {
    double acc = 0;
    for (size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]);
    return acc;
}

}  // namespace ppnet::kern
