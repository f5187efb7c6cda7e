#include "ppnet/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <future>
#include <sstream>

#include "ppnet/errors.hpp"

namespace ppnet {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

// 11-tap Gaussian, normalized.
const std::vector<double>& gauss_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(kWin);
        double s = 0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            s += t[i];
        }
        for (auto& v : t) v /= s;
        return t;
    }();
    return taps;
}

// Separable Gaussian filter, valid region only: output (H-10, W-10).
std::vector<double> gauss_filter_valid(const float* img, size_t H, size_t W) {
    const auto& taps = gauss_taps();
    const size_t Wv = W - kWin + 1, Hv = H - kWin + 1;
    std::vector<double> rows(H * Wv);
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < Wv; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += taps[i] * img[y * W + x + i];
            rows[y * Wv + x] = acc;
        }
    std::vector<double> out(Hv * Wv);
    for (size_t y = 0; y < Hv; ++y)
        for (size_t x = 0; x < Wv; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += taps[i] * rows[(y + i) * Wv + x];
            out[y * Wv + x] = acc;
        }
    return out;
}

double mse(const TensorF& a, const TensorF& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

size_t worker_threads() {
    if (const char* env = std::getenv("PPNET_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<size_t>(n);
    }
    return 1;
}

}  // namespace

std::optional<double> psnr(const TensorF& a, const TensorF& b, double max_val) {
    require_same_shape(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return std::nullopt;
    return 10.0 * std::log10(max_val * max_val / m);
}

double ssim(const TensorF& a, const TensorF& b, double max_val) {
    require_same_shape(a, b, "ssim");
    if (a.rank() != 3) throw ContractError("ssim: expected (C,H,W) images");
    const size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    if (H < kWin || W < kWin)
        throw ContractError("ssim: image smaller than the 11x11 window");
    const double c1 = (0.01 * max_val) * (0.01 * max_val);
    const double c2 = (0.03 * max_val) * (0.03 * max_val);
    double total = 0;
    size_t count = 0;
    for (size_t c = 0; c < C; ++c) {
        const float* pa = a.data.data() + c * H * W;
        const float* pb = b.data.data() + c * H * W;
        // squared/product planes for the variance terms
        std::vector<float> aa(H * W), bb(H * W), ab(H * W);
        for (size_t i = 0; i < H * W; ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = gauss_filter_valid(pa, H, W);
        const auto mu_b = gauss_filter_valid(pb, H, W);
        const auto m_aa = gauss_filter_valid(aa.data(), H, W);
        const auto m_bb = gauss_filter_valid(bb.data(), H, W);
        const auto m_ab = gauss_filter_valid(ab.data(), H, W);
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        count += mu_a.size();
    }
    return total / static_cast<double>(count);
}

EvalReport evaluate_rollout(const std::vector<TensorF>& pred, const std::vector<TensorF>& truth,
                            const std::vector<size_t>& windows) {
    if (pred.size() != truth.size())
        throw ContractError("evaluate_rollout: horizon mismatch, " + std::to_string(pred.size()) +
                            " vs " + std::to_string(truth.size()));
    if (pred.empty()) throw ContractError("evaluate_rollout: empty horizon");
    EvalReport rep;
    rep.ssim_t.resize(pred.size());
    rep.psnr_t.resize(pred.size());
    const size_t nthreads = worker_threads();
    auto eval_range = [&](size_t lo, size_t hi) {
        for (size_t t = lo; t < hi; ++t) {
            rep.ssim_t[t] = ssim(pred[t], truth[t]);
            rep.psnr_t[t] = psnr(pred[t], truth[t]);
        }
    };
    if (nthreads <= 1 || pred.size() < 2) {
        eval_range(0, pred.size());
    } else {
        std::vector<std::future<void>> futs;
        const size_t chunk = (pred.size() + nthreads - 1) / nthreads;
        for (size_t lo = 0; lo < pred.size(); lo += chunk)
            futs.push_back(std::async(std::launch::async, eval_range, lo,
                                      std::min(lo + chunk, pred.size())));
        for (auto& f : futs) f.get();
    }
    for (size_t w : windows) {
        const size_t n = std::min(w, pred.size());
        if (n == 0) continue;
        EvalReport::Window win;
        win.horizon = n;
        double ssum = 0, psum = 0;
        size_t pcount = 0;
        for (size_t t = 0; t < n; ++t) {
            ssum += rep.ssim_t[t];
            if (rep.psnr_t[t]) {
                psum += *rep.psnr_t[t];
                ++pcount;
            }
        }
        win.mean_ssim = ssum / static_cast<double>(n);
        win.mean_psnr = pcount ? std::optional<double>(psum / static_cast<double>(pcount))
                               : std::nullopt;
        rep.windows.push_back(win);
    }
    return rep;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "t,ssim,psnr,lpips\n";
    for (size_t t = 0; t < ssim_t.size(); ++t) {
        os << t << "," << ssim_t[t] << ",";
        if (psnr_t[t])
            os << *psnr_t[t];
        else
            os << "identical";
        os << ",\n";
    }
    for (const auto& w : windows) {
        os << "window_" << w.horizon << "," << w.mean_ssim << ",";
        if (w.mean_psnr)
            os << *w.mean_psnr;
        else
            os << "identical";
        os << ",\n";
    }
    return os.str();
}

}  // namespace ppnet
