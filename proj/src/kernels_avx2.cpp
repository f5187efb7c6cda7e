// AVX2 f32 backend. Vectorizes across the width dimension so every output
// element sees the same accumulation order as the scalar backend; multiply and
// add stay separate instructions (no FMA) and the TU is built with
// -ffp-contract=off, so results are bit-identical except conv2d_bwd_kernel,
// which uses lane-parallel partial sums.

#include <immintrin.h>

#include "ppnet/kernels.hpp"
#include "ppnet/kernels_ref.hpp"

namespace ppnet::kern {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// orow[x] += w * irow[x], x in [x0, x1)
inline void row_axpy(float w, const float* irow, float* orow, size_t x0, size_t x1) {
    const __m256 wv = _mm256_set1_ps(w);
    size_t x = x0;
    for (; x + 8 <= x1; x += 8) {
        __m256 o = _mm256_loadu_ps(orow + x);
        __m256 i = _mm256_loadu_ps(irow + x);
        o = _mm256_add_ps(o, _mm256_mul_ps(wv, i));
        _mm256_storeu_ps(orow + x, o);
    }
    for (; x < x1; ++x) orow[x] += w * irow[x];
}

void a_conv2d_fwd(const float* in, size_t B, size_t Cin, size_t H, size_t W, const float* K,
                  size_t Cout, size_t k, size_t pad, const float* bias, float* out) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            float* op = out + (b * Cout + co) * Ho * Wo;
            const float bv = bias ? bias[co] : 0.0f;
            for (size_t i = 0; i < Ho * Wo; ++i) op[i] = bv;
            for (size_t ci = 0; ci < Cin; ++ci) {
                const float* ip = in + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const float w = K[((co * Cin + ci) * k + ky) * k + kx];
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        for (size_t y = y0; y < y1; ++y)
                            row_axpy(w, ip + (y + ky - pad) * W + kx - pad, op + y * Wo, x0, x1);
                    }
                }
            }
        }
    }
}

void a_conv2d_bwd_input(const float* gout, size_t B, size_t Cin, size_t H, size_t W,
                        const float* K, size_t Cout, size_t k, size_t pad, float* gin) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            const float* gp = gout + (b * Cout + co) * Ho * Wo;
            for (size_t ci = 0; ci < Cin; ++ci) {
                float* ip = gin + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const float w = K[((co * Cin + ci) * k + ky) * k + kx];
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        for (size_t y = y0; y < y1; ++y) {
                            float* irow = ip + (y + ky - pad) * W + kx - pad;
                            const float* grow = gp + y * Wo;
                            size_t x = x0;
                            const __m256 wv = _mm256_set1_ps(w);
                            for (; x + 8 <= x1; x += 8) {
                                __m256 iv = _mm256_loadu_ps(irow + x);
                                __m256 gv = _mm256_loadu_ps(grow + x);
                                iv = _mm256_add_ps(iv, _mm256_mul_ps(wv, gv));
                                _mm256_storeu_ps(irow + x, iv);
                            }
                            for (; x < x1; ++x) irow[x] += w * grow[x];
                        }
                    }
                }
            }
        }
    }
}

void a_conv2d_bwd_kernel(const float* gout, const float* in, size_t B, size_t Cin, size_t H,
                         size_t W, size_t Cout, size_t k, size_t pad, float* gK) {
    const size_t Ho = conv_out_dim(H, k, pad);
    const size_t Wo = conv_out_dim(W, k, pad);
    for (size_t b = 0; b < B; ++b) {
        for (size_t co = 0; co < Cout; ++co) {
            const float* gp = gout + (b * Cout + co) * Ho * Wo;
            for (size_t ci = 0; ci < Cin; ++ci) {
                const float* ip = in + (b * Cin + ci) * H * W;
                for (size_t ky = 0; ky < k; ++ky) {
                    const size_t y0 = pad > ky ? pad - ky : 0;
                    const size_t y1 = H + pad >= ky ? std::min(Ho, H + pad - ky) : 0;
                    for (size_t kx = 0; kx < k; ++kx) {
                        const size_t x0 = pad > kx ? pad - kx : 0;
                        const size_t x1 = W + pad >= kx ? std::min(Wo, W + pad - kx) : 0;
                        __m256 vacc = _mm256_setzero_ps();
                        float tail = 0.0f;
                        for (size_t y = y0; y < y1; ++y) {
                            const float* irow = ip + (y + ky - pad) * W + kx - pad;
                            const float* grow = gp + y * Wo;
                            size_t x = x0;
                            for (; x + 8 <= x1; x += 8) {
                                __m256 gv = _mm256_loadu_ps(grow + x);
                                __m256 iv = _mm256_loadu_ps(irow + x);
                                vacc = _mm256_add_ps(vacc, _mm256_mul_ps(gv, iv));
                            }
                            for (; x < x1; ++x) tail += grow[x] * irow[x];
                        }
                        gK[((co * Cin + ci) * k + ky) * k + kx] += hsum8(vacc) + tail;
                    }
                }
            }
        }
    }
}

void a_add(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] + b[i];
}
void a_sub(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] - b[i];
}
void a_mul(const float* a, const float* b, float* o, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] * b[i];
}
void a_scale(const float* a, float s, float* o, size_t n) {
    const __m256 sv = _mm256_set1_ps(s);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
    for (; i < n; ++i) o[i] = a[i] * s;
}
void a_axpy(float a, const float* x, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 yv = _mm256_loadu_ps(y + i);
        yv = _mm256_add_ps(yv, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}
void a_acc_mul(const float* a, const float* b, float* d, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 dv = _mm256_loadu_ps(d + i);
        dv = _mm256_add_ps(dv, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
        _mm256_storeu_ps(d + i, dv);
    }
    for (; i < n; ++i) d[i] += a[i] * b[i];
}
void a_relu(const float* a, float* o, size_t n) {
    const __m256 z = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_max_ps(_mm256_loadu_ps(a + i), z));
    for (; i < n; ++i) o[i] = a[i] > 0.0f ? a[i] : 0.0f;
}
void a_relu_bwd(const float* x, const float* g, float* gi, size_t n) {
    const __m256 z = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
        __m256 giv = _mm256_loadu_ps(gi + i);
        __m256 sum = _mm256_add_ps(giv, _mm256_loadu_ps(g + i));
        // blend keeps untouched lanes bit-identical (gi + 0.0 would flip -0.0)
        _mm256_storeu_ps(gi + i, _mm256_blendv_ps(giv, sum, mask));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) gi[i] += g[i];
}
void a_adam(float* p, const float* g, float* m, float* v, size_t n, float lr, float b1, float b2,
            float eps, float bc1, float bc2) {
    const __m256 b1v = _mm256_set1_ps(b1), ob1 = _mm256_set1_ps(1.0f - b1);
    const __m256 b2v = _mm256_set1_ps(b2), ob2 = _mm256_set1_ps(1.0f - b2);
    const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
    const __m256 bc1v = _mm256_set1_ps(bc1), bc2v = _mm256_set1_ps(bc2);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1v, _mm256_loadu_ps(m + i)),
                                  _mm256_mul_ps(ob1, gv));
        __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2v, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(ob2, _mm256_mul_ps(gv, gv)));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        __m256 mhat = _mm256_div_ps(mv, bc1v);
        __m256 vhat = _mm256_div_ps(vv, bc2v);
        __m256 step =
            _mm256_div_ps(_mm256_mul_ps(lrv, mhat), _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * (g[i] * g[i]);
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels* avx2() {
    static const Kernels k = {
        "avx2",          a_conv2d_fwd, a_conv2d_bwd_input, a_conv2d_bwd_kernel,
        a_add,           a_sub,        a_mul,              a_scale,
        a_axpy,          a_acc_mul,    a_relu,             a_relu_bwd,
        a_adam,
    };
    return &k;
}

}  // namespace ppnet::kern
