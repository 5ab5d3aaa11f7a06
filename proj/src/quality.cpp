#include "eimlab/quality.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

namespace {

constexpr double kPsnrCap = 99.0;
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_shapes(const Raster& a, const Raster& b) {
    for (int ch = 0; ch < 3; ++ch) {
        if (a[ch].rows() != b[ch].rows() || a[ch].cols() != b[ch].cols())
            throw std::invalid_argument("quality: raster shape mismatch");
        if (a[ch].rows() != a[0].rows() || a[ch].cols() != a[0].cols())
            throw std::invalid_argument("quality: ragged raster");
    }
}

Eigen::MatrixXd gaussian_kernel() {
    Eigen::MatrixXd k(kWindow, kWindow);
    const int half = kWindow / 2;
    for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
            const double dy = i - half, dx = j - half;
            k(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        }
    k /= k.sum();
    return k;
}

// per-window SSIM over valid windows; optional center mask selects windows
double ssim_impl(const Raster& a, const Raster& b, const Eigen::ArrayXXd* mask) {
    check_shapes(a, b);
    const long rows = a[0].rows(), cols = a[0].cols();
    if (rows < kWindow || cols < kWindow)
        throw std::invalid_argument("ssim: raster smaller than the window");
    if (mask && (mask->rows() != rows || mask->cols() != cols))
        throw std::invalid_argument("ssim: mask shape mismatch");

    static const Eigen::MatrixXd kernel = gaussian_kernel();
    const int half = kWindow / 2;
    double total = 0.0;
    long count = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (long i = 0; i + kWindow <= rows; ++i) {
            for (long j = 0; j + kWindow <= cols; ++j) {
                if (mask && (*mask)(i + half, j + half) <= 0.5)
                    continue;
                const auto wa = a[ch].block(i, j, kWindow, kWindow).array();
                const auto wb = b[ch].block(i, j, kWindow, kWindow).array();
                const auto k = kernel.array();
                const double mu_a = (k * wa).sum();
                const double mu_b = (k * wb).sum();
                const double var_a = (k * (wa - mu_a).square()).sum();
                const double var_b = (k * (wb - mu_b).square()).sum();
                const double cov = (k * (wa - mu_a) * (wb - mu_b)).sum();
                total += (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2) /
                         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
                ++count;
            }
        }
    }
    if (count == 0)
        throw std::invalid_argument("ssim: mask selects no windows");
    return total / static_cast<double>(count);
}

} // namespace

double psnr(const Raster& a, const Raster& b) {
    check_shapes(a, b);
    double se = 0.0;
    long n = 0;
    for (int ch = 0; ch < 3; ++ch) {
        se += (a[ch] - b[ch]).squaredNorm();
        n += a[ch].size();
    }
    const double mse = se / static_cast<double>(n);
    if (mse <= 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Raster& a, const Raster& b) { return ssim_impl(a, b, nullptr); }

double masked_psnr(const Raster& a, const Raster& b, const Eigen::ArrayXXd& mask) {
    check_shapes(a, b);
    if (mask.rows() != a[0].rows() || mask.cols() != a[0].cols())
        throw std::invalid_argument("masked_psnr: mask shape mismatch");
    double se = 0.0;
    long n = 0;
    for (long i = 0; i < mask.rows(); ++i)
        for (long j = 0; j < mask.cols(); ++j) {
            if (mask(i, j) <= 0.5)
                continue;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = a[ch](i, j) - b[ch](i, j);
                se += d * d;
            }
            n += 3;
        }
    if (n == 0)
        throw std::invalid_argument("masked_psnr: empty mask");
    const double mse = se / static_cast<double>(n);
    if (mse <= 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double masked_ssim(const Raster& a, const Raster& b, const Eigen::ArrayXXd& mask) {
    return ssim_impl(a, b, &mask);
}

std::pair<double, double> masked_background_metrics(const Scene& source, const Raster& edited) {
    return {masked_psnr(source.raster, edited, source.background_mask),
            masked_ssim(source.raster, edited, source.background_mask)};
}

} // namespace eimlab
