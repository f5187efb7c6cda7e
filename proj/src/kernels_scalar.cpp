// Scalar f32 backend: direct instantiation of the reference templates.
// Compiled with -ffp-contract=off so the SIMD backends can match it bit-for-bit.

#include "ppnet/kernels.hpp"
#include "ppnet/kernels_ref.hpp"

namespace ppnet::kern {

namespace {

void s_conv2d_fwd(const float* in, size_t B, size_t Cin, size_t H, size_t W, const float* K,
                  size_t Cout, size_t k, size_t pad, const float* bias, float* out) {
    conv2d_fwd_ref(in, B, Cin, H, W, K, Cout, k, pad, bias, out);
}
void s_conv2d_bwd_input(const float* gout, size_t B, size_t Cin, size_t H, size_t W,
                        const float* K, size_t Cout, size_t k, size_t pad, float* gin) {
    conv2d_bwd_input_ref(gout, B, Cin, H, W, K, Cout, k, pad, gin);
}
void s_conv2d_bwd_kernel(const float* gout, const float* in, size_t B, size_t Cin, size_t H,
                         size_t W, size_t Cout, size_t k, size_t pad, float* gK) {
    conv2d_bwd_kernel_ref(gout, in, B, Cin, H, W, Cout, k, pad, gK);
}
void s_add(const float* a, const float* b, float* o, size_t n) { add_ref(a, b, o, n); }
void s_sub(const float* a, const float* b, float* o, size_t n) { sub_ref(a, b, o, n); }
void s_mul(const float* a, const float* b, float* o, size_t n) { mul_ref(a, b, o, n); }
void s_scale(const float* a, float s, float* o, size_t n) { scale_ref(a, s, o, n); }
void s_axpy(float a, const float* x, float* y, size_t n) { axpy_ref(a, x, y, n); }
void s_acc_mul(const float* a, const float* b, float* d, size_t n) { acc_mul_ref(a, b, d, n); }
void s_relu(const float* a, float* o, size_t n) { relu_ref(a, o, n); }
void s_relu_bwd(const float* x, const float* g, float* gi, size_t n) { relu_bwd_ref(x, g, gi, n); }
void s_adam(float* p, const float* g, float* m, float* v, size_t n, float lr, float b1, float b2,
            float eps, float bc1, float bc2) {
    adam_ref(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2);
}

}  // namespace

const Kernels& scalar() {
    static const Kernels k = {
        "scalar",        s_conv2d_fwd, s_conv2d_bwd_input, s_conv2d_bwd_kernel,
        s_add,           s_sub,        s_mul,              s_scale,
        s_axpy,          s_acc_mul,    s_relu,             s_relu_bwd,
        s_adam,
    };
    return k;
}

}  // namespace ppnet::kern
