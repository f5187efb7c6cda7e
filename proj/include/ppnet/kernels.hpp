#pragma once

#include <cstddef>

// Runtime-dispatched f32 kernels. The scalar backend instantiates the
// reference templates from kernels_ref.hpp; the AVX2 backend is selected at
// startup when the CPU supports it (override with PPNET_SIMD=scalar|avx2).
//
// Bit-exactness contract vs the scalar backend:
//   conv2d_fwd, conv2d_bwd_input, add, sub, mul, scale, axpy, acc_mul,
//   relu, relu_bwd, adam  -> bit-identical (same per-element operation order)
//   conv2d_bwd_kernel     -> lane-parallel partial sums; equal within
//                            small relative tolerance only

namespace ppnet::kern {

struct Kernels {
    const char* name;
    void (*conv2d_fwd)(const float* in, size_t B, size_t Cin, size_t H, size_t W, const float* K,
                       size_t Cout, size_t k, size_t pad, const float* bias, float* out);
    void (*conv2d_bwd_input)(const float* gout, size_t B, size_t Cin, size_t H, size_t W,
                             const float* K, size_t Cout, size_t k, size_t pad, float* gin);
    void (*conv2d_bwd_kernel)(const float* gout, const float* in, size_t B, size_t Cin, size_t H,
                              size_t W, size_t Cout, size_t k, size_t pad, float* gK);
    void (*add)(const float* a, const float* b, float* out, size_t n);
    void (*sub)(const float* a, const float* b, float* out, size_t n);
    void (*mul)(const float* a, const float* b, float* out, size_t n);
    void (*scale)(const float* a, float s, float* out, size_t n);
    void (*axpy)(float a, const float* x, float* y, size_t n);
    void (*acc_mul)(const float* a, const float* b, float* dst, size_t n);
    void (*relu)(const float* a, float* out, size_t n);
    void (*relu_bwd)(const float* x, const float* g, float* gin, size_t n);
    void (*adam)(float* p, const float* g, float* m, float* v, size_t n, float lr, float b1,
                 float b2, float eps, float bc1, float bc2);
};

// Active backend (chosen once at first use; thereafter stable).
const Kernels& active();

// Named backends for equivalence tests. avx2() is null on machines without it.
const Kernels& scalar();
const Kernels* avx2();

// Force a backend ("scalar", "avx2", "auto"). Returns false if unavailable.
bool set_backend(const char* name);

}  // namespace ppnet::kern
