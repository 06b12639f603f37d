#pragma once

#include "picat/image.hpp"

#include <complex>
#include <vector>

namespace picat {

enum class PerturbKind { Spatial, Frequency };

struct PerturbSpec {
    PerturbKind kind = PerturbKind::Spatial;
    // spatial: std in 0-255 units (denoising convention, divided by 255
    // internally); frequency: std per real/imag component of each orthonormal
    // DFT coefficient
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

// spatial: out = clamp(img + N(0,(sigma/255)^2), 0, 1) i.i.d. per value.
// frequency: per channel, orthonormal 2-D DFT, conjugate-symmetric complex
// Gaussian noise added to every coefficient, inverse transform, clamp.
SrgbImage perturb(const SrgbImage& img, const PerturbSpec& spec);

// orthonormal 2-D DFT helpers (row-column evaluation), exposed for tests
std::vector<std::complex<double>> dft2(const std::vector<double>& data, int h, int w);
std::vector<std::complex<double>> idft2(const std::vector<std::complex<double>>& freq,
                                        int h, int w);

} // namespace picat
