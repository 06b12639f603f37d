#pragma once

#include "picat/image.hpp"

namespace picat {

inline constexpr double kPsnrCapDb = 100.0;

// 10*log10(1/MSE) with MAX=1 over all H*W*3 values; MSE < 1e-10 reports the cap
double psnr(const SrgbImage& a, const SrgbImage& b);

// SSIM on luminance (mean of R,G,B), 11x11 Gaussian window sigma 1.5,
// C1=0.01^2, C2=0.03^2, mean over valid (fully interior) windows
double ssim(const SrgbImage& a, const SrgbImage& b);

} // namespace picat
