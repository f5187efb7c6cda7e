#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ppnet/data.hpp"
#include "ppnet/metrics.hpp"
#include "ppnet/rng.hpp"

using namespace ppnet;

namespace {

TensorF rand_img(Rng& rng, size_t C, size_t H, size_t W) {
    TensorF t({C, H, W});
    for (auto& v : t.data) v = static_cast<float>(rng.next_double());
    return t;
}

TensorF checkerboard(size_t H, size_t W) {
    TensorF t({1, H, W});
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) t.at3(0, y, x) = static_cast<float>((x + y) % 2);
    return t;
}

// reference SSIM for one window position, straight from the formula with a
// uniform window; used only as a sign oracle for the inverted-checkerboard
// case (the production code uses a Gaussian window; the sign agrees)
double ssim_uniform_window(const TensorF& a, const TensorF& b) {
    double ma = 0, mb = 0;
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cov = 0;
    for (size_t i = 0; i < n; ++i) {
        va += (a.data[i] - ma) * (a.data[i] - ma);
        vb += (b.data[i] - mb) * (b.data[i] - mb);
        cov += (a.data[i] - ma) * (b.data[i] - mb);
    }
    va /= n;
    vb /= n;
    cov /= n;
    const double c1 = 1e-4, c2 = 9e-4;
    return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

}  // namespace

TEST_CASE("psnr arithmetic and sentinel") {
    TensorF a = TensorF::zeros({1, 4, 4});
    TensorF b = TensorF::full({1, 4, 4}, 0.1f);
    const auto p = psnr(a, b);
    REQUIRE(p.has_value());
    CHECK(*p == doctest::Approx(20.0).epsilon(1e-6));  // mse 0.01

    CHECK_FALSE(psnr(a, a).has_value());  // identical

    TensorF c = TensorF::full({1, 4, 4}, 1.0f);
    CHECK(*psnr(a, c) == doctest::Approx(0.0).epsilon(1e-9));  // mse 1
    CHECK_THROWS_AS(psnr(a, TensorF::zeros({1, 2, 2})), DimensionError);
}

TEST_CASE("psnr strictly decreases in mse") {
    TensorF a = TensorF::zeros({1, 4, 4});
    double prev = 1e18;
    for (float level : {0.05f, 0.1f, 0.2f, 0.4f, 0.8f}) {
        const double p = *psnr(a, TensorF::full({1, 4, 4}, level));
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim identity, range, symmetry") {
    Rng rng(1);
    const TensorF x = rand_img(rng, 1, 16, 16);
    CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);

    const TensorF y = rand_img(rng, 1, 16, 16);
    const double ab = ssim(x, y);
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    CHECK(ab < 1.0);
    CHECK(std::abs(ab - ssim(y, x)) < 1e-12);

    CHECK_THROWS_AS(ssim(rand_img(rng, 1, 8, 8), rand_img(rng, 1, 8, 8)), ContractError);
}

TEST_CASE("ssim of an inverted checkerboard is negative") {
    const TensorF x = checkerboard(16, 16);
    TensorF inv({1, 16, 16});
    for (size_t i = 0; i < x.size(); ++i) inv.data[i] = 1.0f - x.data[i];
    // oracle: the uniform-window formula on the full image is strongly negative
    CHECK(ssim_uniform_window(x, inv) < 0.0);
    CHECK(ssim(x, inv) < 0.0);
}

TEST_CASE("ssim multi-channel averages over channels") {
    Rng rng(3);
    const TensorF a1 = rand_img(rng, 1, 16, 16);
    const TensorF b1 = rand_img(rng, 1, 16, 16);
    TensorF a3({3, 16, 16}), b3({3, 16, 16});
    for (size_t c = 0; c < 3; ++c) {
        std::copy(a1.data.begin(), a1.data.end(), a3.data.begin() + c * 256);
        std::copy(b1.data.begin(), b1.data.end(), b3.data.begin() + c * 256);
    }
    CHECK(ssim(a3, b3) == doctest::Approx(ssim(a1, b1)).epsilon(1e-12));
}

TEST_CASE("evaluate_rollout: identity, windows, aggregate-mean property") {
    Rng rng(5);
    std::vector<TensorF> truth, pred;
    for (int t = 0; t < 6; ++t) {
        truth.push_back(rand_img(rng, 1, 16, 16));
        pred.push_back(truth.back());
    }
    const EvalReport same = evaluate_rollout(pred, truth, {3, 6});
    for (double s : same.ssim_t) CHECK(std::abs(s - 1.0) < 1e-9);
    for (const auto& p : same.psnr_t) CHECK_FALSE(p.has_value());
    REQUIRE(same.windows.size() == 2);
    CHECK(same.windows[0].horizon == 3);
    CHECK_FALSE(same.windows[0].mean_psnr.has_value());

    for (auto& f : pred) {
        f = rand_img(rng, 1, 16, 16);
    }
    const EvalReport rep = evaluate_rollout(pred, truth, {4});
    double mean4 = 0;
    for (int t = 0; t < 4; ++t) mean4 += rep.ssim_t[t];
    mean4 /= 4;
    CHECK(std::abs(rep.windows[0].mean_ssim - mean4) < 1e-12);

    CHECK_THROWS_AS(evaluate_rollout(pred, std::vector<TensorF>(truth.begin(), truth.end() - 1),
                                     {3}),
                    ContractError);
}

TEST_CASE("copy-last baseline on moving shapes scores below 1") {
    const SequenceSet s = gen_moving_shapes(11, 1, 4, 32, 32, 1, 2, 2);
    const auto frames = split_frames(s.sequences[0]);
    for (size_t t = 0; t + 1 < frames.size(); ++t) CHECK(ssim(frames[t], frames[t + 1]) < 1.0);
}

TEST_CASE("csv shape: t,ssim,psnr,lpips with window rows") {
    Rng rng(7);
    std::vector<TensorF> a = {rand_img(rng, 1, 12, 12), rand_img(rng, 1, 12, 12)};
    const EvalReport rep = evaluate_rollout(a, a, {2});
    const std::string csv = rep.to_csv();
    CHECK(csv.rfind("t,ssim,psnr,lpips\n", 0) == 0);
    CHECK(csv.find("identical") != std::string::npos);
    CHECK(csv.find("window_2,") != std::string::npos);
}
