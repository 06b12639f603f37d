#include "picat/metrics.hpp"

#include <cmath>
#include <vector>

namespace picat {

double psnr(const SrgbImage& a, const SrgbImage& b) {
    if (a.height != b.height || a.width != b.width)
        throw ImageError("psnr: dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.data.size());
    if (mse < 1e-10) return kPsnrCapDb;
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window() {
    std::vector<double> w(static_cast<size_t>(kWindow) * kWindow);
    const int r = kWindow / 2;
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            w[static_cast<size_t>(dy + r) * kWindow + (dx + r)] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

std::vector<double> luminance(const SrgbImage& img) {
    std::vector<double> lum(img.pixel_count());
    for (size_t p = 0; p < lum.size(); ++p)
        lum[p] = (img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0;
    return lum;
}

} // namespace

double ssim(const SrgbImage& a, const SrgbImage& b) {
    if (a.height != b.height || a.width != b.width)
        throw ImageError("ssim: dimension mismatch");
    if (a.height < kWindow || a.width < kWindow)
        throw ImageError("ssim: image smaller than the 11x11 window");
    static const std::vector<double> win = gaussian_window();
    const auto la = luminance(a);
    const auto lb = luminance(b);
    const int r = kWindow / 2;
    const int w = a.width;

    double total = 0.0;
    int64_t count = 0;
    for (int y = r; y < a.height - r; ++y) {
        for (int x = r; x < a.width - r; ++x) {
            double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const size_t row = static_cast<size_t>(y + dy) * w + x;
                const double* wrow = win.data() + static_cast<size_t>(dy + r) * kWindow;
                for (int dx = -r; dx <= r; ++dx) {
                    const double wv = wrow[dx + r];
                    const double va = la[row + dx];
                    const double vb = lb[row + dx];
                    mu_a += wv * va;
                    mu_b += wv * vb;
                    aa += wv * va * va;
                    bb += wv * vb * vb;
                    ab += wv * va * vb;
                }
            }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
            const double den =
                (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

} // namespace picat
