#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet {

// 10*log10(max^2 / mse); nullopt means the images are identical (mse == 0).
std::optional<double> psnr(const TensorF& a, const TensorF& b, double max_val = 1.0);

// Mean SSIM over channels and sliding 11x11 Gaussian windows (sigma 1.5),
// C1=(0.01*max)^2, C2=(0.03*max)^2. Inputs are (C,H,W) in [0,1], H,W >= 11.
double ssim(const TensorF& a, const TensorF& b, double max_val = 1.0);

struct EvalReport {
    std::vector<double> ssim_t;
    std::vector<std::optional<double>> psnr_t;  // nullopt = identical
    struct Window {
        size_t horizon;  // first N steps
        double mean_ssim;
        std::optional<double> mean_psnr;
    };
    std::vector<Window> windows;

    // CSV with columns t,ssim,psnr,lpips; lpips is reserved (always empty)
    // so external perceptual scores can be merged in later.
    std::string to_csv() const;
};

// Per-step SSIM/PSNR plus means over the first-N-step windows requested.
EvalReport evaluate_rollout(const std::vector<TensorF>& pred, const std::vector<TensorF>& truth,
                            const std::vector<size_t>& windows);

}  // namespace ppnet
