#include <cstdlib>
#include <cstring>

#include "ppnet/kernels.hpp"

namespace ppnet::kern {

#ifndef PPNET_HAVE_AVX2
const Kernels* avx2() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Kernels* pick_auto() {
    if (avx2() && cpu_has_avx2()) return avx2();
    return &scalar();
}

const Kernels* pick_initial() {
    if (const char* env = std::getenv("PPNET_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar();
        if (std::strcmp(env, "avx2") == 0 && avx2() && cpu_has_avx2()) return avx2();
    }
    return pick_auto();
}

const Kernels*& current() {
    static const Kernels* k = pick_initial();
    return k;
}

}  // namespace

const Kernels& active() { return *current(); }

bool set_backend(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        current() = &scalar();
        return true;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (!avx2() || !cpu_has_avx2()) return false;
        current() = avx2();
        return true;
    }
    if (std::strcmp(name, "auto") == 0) {
        current() = pick_auto();
        return true;
    }
    return false;
}

}  // namespace ppnet::kern
