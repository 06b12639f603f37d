#include "picat/perturb.hpp"
#include "picat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace picat {

namespace {

using cd = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

// orthonormal 1-D DFT of every row of an h x w complex grid (sign = -1
// forward, +1 inverse)
void dft_rows(std::vector<cd>& grid, int h, int w, int sign) {
    std::vector<cd> twiddle(static_cast<size_t>(w) * w);
    for (int k = 0; k < w; ++k)
        for (int n = 0; n < w; ++n)
            twiddle[static_cast<size_t>(k) * w + n] =
                std::polar(1.0, sign * 2.0 * kPi * k * n / w);
    const double norm = 1.0 / std::sqrt(static_cast<double>(w));
    std::vector<cd> row(w);
    for (int y = 0; y < h; ++y) {
        cd* base = grid.data() + static_cast<size_t>(y) * w;
        for (int k = 0; k < w; ++k) {
            cd acc = 0.0;
            const cd* tw = twiddle.data() + static_cast<size_t>(k) * w;
            for (int n = 0; n < w; ++n) acc += base[n] * tw[n];
            row[k] = acc * norm;
        }
        std::copy(row.begin(), row.end(), base);
    }
}

void transpose_grid(std::vector<cd>& grid, int h, int w) {
    std::vector<cd> out(grid.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(x) * h + y] = grid[static_cast<size_t>(y) * w + x];
    grid = std::move(out);
}

std::vector<cd> dft2_impl(std::vector<cd> grid, int h, int w, int sign) {
    dft_rows(grid, h, w, sign);
    transpose_grid(grid, h, w);
    dft_rows(grid, w, h, sign);
    transpose_grid(grid, w, h);
    return grid;
}

} // namespace

std::vector<cd> dft2(const std::vector<double>& data, int h, int w) {
    if (data.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("dft2: size mismatch");
    std::vector<cd> grid(data.begin(), data.end());
    return dft2_impl(std::move(grid), h, w, -1);
}

std::vector<cd> idft2(const std::vector<cd>& freq, int h, int w) {
    if (freq.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("idft2: size mismatch");
    return dft2_impl(freq, h, w, +1);
}

namespace {

SrgbImage perturb_spatial(const SrgbImage& img, const PerturbSpec& spec) {
    Rng rng(spec.seed);
    const double std_norm = spec.sigma / 255.0;
    SrgbImage out(img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = std::clamp(img.data[i] + rng.normal(0.0, std_norm), 0.0, 1.0);
    return out;
}

SrgbImage perturb_frequency(const SrgbImage& img, const PerturbSpec& spec) {
    const int h = img.height, w = img.width;
    Rng rng(spec.seed);
    SrgbImage out(h, w);
    std::vector<double> channel(static_cast<size_t>(h) * w);
    for (int c = 0; c < 3; ++c) {
        for (size_t p = 0; p < channel.size(); ++p) channel[p] = img.data[p * 3 + c];
        auto freq = dft2(channel, h, w);
        // conjugate-symmetric noise: each coefficient keeps E|N|^2 = 2 sigma^2
        for (int u = 0; u < h; ++u) {
            for (int v = 0; v < w; ++v) {
                const int up = (h - u) % h;
                const int vp = (w - v) % w;
                const size_t idx = static_cast<size_t>(u) * w + v;
                const size_t pidx = static_cast<size_t>(up) * w + vp;
                if (idx == pidx) {
                    // self-conjugate coefficient stays real
                    freq[idx] += cd(rng.normal(0.0, spec.sigma * std::sqrt(2.0)), 0.0);
                } else if (idx < pidx) {
                    cd noise(rng.normal(0.0, spec.sigma), rng.normal(0.0, spec.sigma));
                    freq[idx] += noise;
                    freq[pidx] += std::conj(noise);
                }
            }
        }
        auto spatial = idft2(freq, h, w);
        for (size_t p = 0; p < channel.size(); ++p) {
            if (std::fabs(spatial[p].imag()) > 1e-6)
                throw ImageError("frequency perturbation lost conjugate symmetry");
            out.data[p * 3 + c] = std::clamp(spatial[p].real(), 0.0, 1.0);
        }
    }
    return out;
}

} // namespace

SrgbImage perturb(const SrgbImage& img, const PerturbSpec& spec) {
    if (spec.sigma < 0.0) throw ImageError("perturb: sigma must be >= 0");
    if (spec.sigma == 0.0) return img;
    return spec.kind == PerturbKind::Spatial ? perturb_spatial(img, spec)
                                             : perturb_frequency(img, spec);
}

} // namespace picat
