#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "ppnet/kernels.hpp"
#include "ppnet/kernels_ref.hpp"
#include "ppnet/rng.hpp"

using namespace ppnet;

namespace {

std::vector<float> rand_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

struct ConvCase {
    size_t B, Cin, H, W, Cout, k, pad;
};

const ConvCase kConvCases[] = {
    {1, 1, 2, 2, 1, 3, 1},   // the tiny hand case
    {2, 3, 8, 8, 4, 3, 1},
    {1, 2, 7, 9, 3, 5, 2},
    {2, 4, 16, 16, 8, 3, 1},
    {1, 1, 11, 13, 2, 1, 0},
};

}  // namespace

TEST_CASE("conv2d_fwd matches a brute-force window-sum oracle") {
    // independent oracle: for every output pixel, sum over the full window
    // with explicit bounds checks (no shared loop structure with the kernel)
    Rng rng(42);
    for (const auto& c : kConvCases) {
        const size_t Ho = kern::conv_out_dim(c.H, c.k, c.pad);
        const size_t Wo = kern::conv_out_dim(c.W, c.k, c.pad);
        const auto in = rand_vec(rng, c.B * c.Cin * c.H * c.W);
        const auto K = rand_vec(rng, c.Cout * c.Cin * c.k * c.k);
        const auto bias = rand_vec(rng, c.Cout);
        std::vector<float> out(c.B * c.Cout * Ho * Wo);
        kern::conv2d_fwd_ref(in.data(), c.B, c.Cin, c.H, c.W, K.data(), c.Cout, c.k, c.pad,
                             bias.data(), out.data());
        for (size_t b = 0; b < c.B; ++b)
            for (size_t co = 0; co < c.Cout; ++co)
                for (size_t y = 0; y < Ho; ++y)
                    for (size_t x = 0; x < Wo; ++x) {
                        double acc = bias[co];
                        for (size_t ci = 0; ci < c.Cin; ++ci)
                            for (size_t ky = 0; ky < c.k; ++ky)
                                for (size_t kx = 0; kx < c.k; ++kx) {
                                    const long iy = static_cast<long>(y + ky) -
                                                    static_cast<long>(c.pad);
                                    const long ix = static_cast<long>(x + kx) -
                                                    static_cast<long>(c.pad);
                                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(c.H) ||
                                        ix >= static_cast<long>(c.W))
                                        continue;
                                    acc += static_cast<double>(
                                               K[((co * c.Cin + ci) * c.k + ky) * c.k + kx]) *
                                           in[((b * c.Cin + ci) * c.H + iy) * c.W + ix];
                                }
                        const float got = out[((b * c.Cout + co) * Ho + y) * Wo + x];
                        CHECK(got == doctest::Approx(acc).epsilon(1e-5));
                    }
    }
}

TEST_CASE("conv2d_fwd on the 2x2 ones-window case") {
    // 2x2 input [[1,2],[3,4]], 3x3 ones kernel, pad 1: every 3x3 window
    // covers the whole input, so each output equals 1+2+3+4 = 10
    const std::vector<float> in = {1, 2, 3, 4};
    const std::vector<float> K(9, 1.0f);
    std::vector<float> out(4);
    kern::conv2d_fwd_ref(in.data(), 1, 1, 2, 2, K.data(), 1, 3, 1,
                         static_cast<const float*>(nullptr), out.data());
    for (float v : out) CHECK(v == 10.0f);
}

TEST_CASE("scalar and avx2 backends agree") {
    const kern::Kernels& s = kern::scalar();
    const kern::Kernels* a = kern::avx2();
    if (!a) {
        MESSAGE("avx2 backend unavailable on this machine; skipping");
        return;
    }

    Rng rng(7);
    SUBCASE("conv2d_fwd / bwd_input bit-exact") {
        for (const auto& c : kConvCases) {
            const size_t Ho = kern::conv_out_dim(c.H, c.k, c.pad);
            const size_t Wo = kern::conv_out_dim(c.W, c.k, c.pad);
            const auto in = rand_vec(rng, c.B * c.Cin * c.H * c.W);
            const auto K = rand_vec(rng, c.Cout * c.Cin * c.k * c.k);
            const auto bias = rand_vec(rng, c.Cout);
            const auto gout = rand_vec(rng, c.B * c.Cout * Ho * Wo);

            std::vector<float> o1(gout.size()), o2(gout.size());
            s.conv2d_fwd(in.data(), c.B, c.Cin, c.H, c.W, K.data(), c.Cout, c.k, c.pad,
                         bias.data(), o1.data());
            a->conv2d_fwd(in.data(), c.B, c.Cin, c.H, c.W, K.data(), c.Cout, c.k, c.pad,
                          bias.data(), o2.data());
            CHECK(bit_equal(o1, o2));

            std::vector<float> g1(in.size(), 0.0f), g2(in.size(), 0.0f);
            s.conv2d_bwd_input(gout.data(), c.B, c.Cin, c.H, c.W, K.data(), c.Cout, c.k, c.pad,
                               g1.data());
            a->conv2d_bwd_input(gout.data(), c.B, c.Cin, c.H, c.W, K.data(), c.Cout, c.k, c.pad,
                                g2.data());
            CHECK(bit_equal(g1, g2));
        }
    }

    SUBCASE("conv2d_bwd_kernel within tolerance") {
        for (const auto& c : kConvCases) {
            const size_t Ho = kern::conv_out_dim(c.H, c.k, c.pad);
            const size_t Wo = kern::conv_out_dim(c.W, c.k, c.pad);
            const auto in = rand_vec(rng, c.B * c.Cin * c.H * c.W);
            const auto gout = rand_vec(rng, c.B * c.Cout * Ho * Wo);
            std::vector<float> g1(c.Cout * c.Cin * c.k * c.k, 0.0f), g2 = g1;
            s.conv2d_bwd_kernel(gout.data(), in.data(), c.B, c.Cin, c.H, c.W, c.Cout, c.k,
                                c.pad, g1.data());
            a->conv2d_bwd_kernel(gout.data(), in.data(), c.B, c.Cin, c.H, c.W, c.Cout, c.k,
                                 c.pad, g2.data());
            for (size_t i = 0; i < g1.size(); ++i) {
                const double denom = std::max(1.0, std::abs(static_cast<double>(g1[i])));
                CHECK(std::abs(g1[i] - g2[i]) / denom < 1e-5);
            }
        }
    }

    SUBCASE("elementwise ops bit-exact across sizes incl. tails") {
        for (size_t n : {1u, 7u, 8u, 9u, 255u, 256u, 1000u}) {
            const auto x = rand_vec(rng, n, -2.0, 2.0);
            const auto y = rand_vec(rng, n, -2.0, 2.0);
            std::vector<float> r1(n), r2(n);

            s.add(x.data(), y.data(), r1.data(), n);
            a->add(x.data(), y.data(), r2.data(), n);
            CHECK(bit_equal(r1, r2));
            s.sub(x.data(), y.data(), r1.data(), n);
            a->sub(x.data(), y.data(), r2.data(), n);
            CHECK(bit_equal(r1, r2));
            s.mul(x.data(), y.data(), r1.data(), n);
            a->mul(x.data(), y.data(), r2.data(), n);
            CHECK(bit_equal(r1, r2));
            s.scale(x.data(), 1.7f, r1.data(), n);
            a->scale(x.data(), 1.7f, r2.data(), n);
            CHECK(bit_equal(r1, r2));
            s.relu(x.data(), r1.data(), n);
            a->relu(x.data(), r2.data(), n);
            CHECK(bit_equal(r1, r2));

            std::vector<float> y1 = y, y2 = y;
            s.axpy(0.3f, x.data(), y1.data(), n);
            a->axpy(0.3f, x.data(), y2.data(), n);
            CHECK(bit_equal(y1, y2));
            y1 = y;
            y2 = y;
            s.acc_mul(x.data(), y.data(), y1.data(), n);
            a->acc_mul(x.data(), y.data(), y2.data(), n);
            CHECK(bit_equal(y1, y2));
            y1 = y;
            y2 = y;
            s.relu_bwd(x.data(), x.data(), y1.data(), n);
            a->relu_bwd(x.data(), x.data(), y2.data(), n);
            CHECK(bit_equal(y1, y2));
        }
    }

    SUBCASE("adam bit-exact") {
        for (size_t n : {3u, 8u, 100u, 257u}) {
            auto p1 = rand_vec(rng, n), g = rand_vec(rng, n);
            auto m1 = rand_vec(rng, n, 0.0, 0.1), v1 = rand_vec(rng, n, 0.0, 0.1);
            auto p2 = p1, m2 = m1, v2 = v1;
            const float bc1 = 1.0f - std::pow(0.9f, 5.0f), bc2 = 1.0f - std::pow(0.999f, 5.0f);
            s.adam(p1.data(), g.data(), m1.data(), v1.data(), n, 2e-4f, 0.9f, 0.999f, 1e-8f,
                   bc1, bc2);
            a->adam(p2.data(), g.data(), m2.data(), v2.data(), n, 2e-4f, 0.9f, 0.999f, 1e-8f,
                    bc1, bc2);
            CHECK(bit_equal(p1, p2));
            CHECK(bit_equal(m1, m2));
            CHECK(bit_equal(v1, v2));
        }
    }
}

TEST_CASE("set_backend switches the active table") {
    REQUIRE(kern::set_backend("scalar"));
    CHECK(std::string(kern::active().name) == "scalar");
    const bool have_avx2 = kern::avx2() != nullptr;
    CHECK(kern::set_backend("avx2") == have_avx2);
    if (have_avx2) CHECK(std::string(kern::active().name) == "avx2");
    REQUIRE(kern::set_backend("auto"));
}
