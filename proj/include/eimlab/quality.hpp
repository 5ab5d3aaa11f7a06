#ifndef EIMLAB_QUALITY_HPP
#define EIMLAB_QUALITY_HPP

#include <utility>

#include "eimlab/scene.hpp"

namespace eimlab {

// 10 log10(1/MSE) over all channels; identical inputs cap at 99 dB.
double psnr(const Raster& a, const Raster& b);

// Gaussian-window SSIM, window 11, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1,
// valid windows only, channel-averaged.
double ssim(const Raster& a, const Raster& b);

// Restricted variants: PSNR over mask pixels, SSIM over windows whose center
// pixel lies in the mask.
double masked_psnr(const Raster& a, const Raster& b, const Eigen::ArrayXXd& mask);
double masked_ssim(const Raster& a, const Raster& b, const Eigen::ArrayXXd& mask);

std::pair<double, double> masked_background_metrics(const Scene& source, const Raster& edited);

} // namespace eimlab

#endif
