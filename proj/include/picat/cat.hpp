#pragma once

#include "picat/image.hpp"
#include "picat/ops.hpp"
#include "picat/rng.hpp"
#include "picat/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace picat {

enum class RatioDomain { Linear, Log };

// Per-pixel channel-ratio maps, channel order (rg, rb, gb).
struct RatioDescriptor {
    int height = 0;
    int width = 0;
    RatioDomain domain = RatioDomain::Linear;
    std::array<std::vector<double>, 3> channels;

    double at(int ch, int y, int x) const {
        return channels[ch][static_cast<size_t>(y) * width + x];
    }
};

// Multi-channel feature map produced by kernel_features.
struct FeatureStack {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data; // channels x H x W, row-major

    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
};

struct DensityParams {
    double k = 2.0;
    static constexpr double tau = 1e-8;
};

enum class KernelTag { Smoothing, Differential };

struct Kernel2d {
    std::string name;
    int side = 0; // odd
    KernelTag tag;
    std::vector<double> weights; // side x side
};

// Named kernels; tags are checked numerically at construction:
// smoothing sums to 1, differential sums to 0, |sum - target| < 1e-12.
class KernelBank {
public:
    void add(Kernel2d kernel);
    const std::vector<Kernel2d>& kernels() const { return kernels_; }
    size_t size() const { return kernels_.size(); }

    static KernelBank default_bank(); // 3x3 Gaussian sigma=1 + 3x3 Laplacian
    static Kernel2d gaussian3x3(double sigma = 1.0);
    static Kernel2d laplacian3x3();

private:
    std::vector<Kernel2d> kernels_;
};

inline constexpr double kRatioEps = 1e-8;
// near-black denominators would otherwise blow ratios up to ~1/eps and
// destabilize everything downstream; values this large carry no color signal
inline constexpr double kRatioClip = 100.0;

// (num+eps)/(den+eps) per pixel, clipped at kRatioClip; log domain applies
// natural log (clip applies to the underlying ratio).
RatioDescriptor channel_ratios(const SrgbImage& img, double eps = kRatioEps,
                               RatioDomain domain = RatioDomain::Linear);

// Reference cross-color-ratio oracle between two pixels:
// M_rg = (R_p1*G_p2 + eps) / (R_p2*G_p1 + eps), likewise rb, gb.
std::array<double, 3> cross_color_ratio(const SrgbImage& img, int y1, int x1,
                                        int y2, int x2, double eps = kRatioEps);

// S_k = (sin(pi*I_max/2) + tau)^(1/k), applied per pixel to every channel.
double density_scale_factor(double i_max, const DensityParams& params);
RatioDescriptor density_scale(const RatioDescriptor& ratios,
                              const LuminanceMap& i_max,
                              const DensityParams& params);

// Each ratio channel correlated (kernel unflipped) with each bank kernel,
// replicate-edge padding; output has 3*|bank| channels.
FeatureStack kernel_features(const RatioDescriptor& desc, const KernelBank& bank);

// Dynamic color-aware filter parameters: two channel-expanding convs plus the
// pooled kernel size of the generated depthwise filter.
struct DcafParams {
    int in_channels = 3;
    int channel_count = 8; // c
    int kernel_size = 3;   // k_f, odd
    Tensor f_weight, f_bias;
    Tensor h_weight, h_bias;

    static DcafParams init(int in_channels, int channel_count, int kernel_size,
                           Rng& rng);
    void register_params(ParamSet& set, const std::string& prefix);
};

// g = adaptive_avg_pool(f(c_map)) -> per-channel k_f x k_f filter;
// output = depthwise(h(c_map), g), spatial dims preserved.
Tensor dcaf_forward(const Tensor& c_map, const DcafParams& params);

// Full trainable transform: ratios -> density scaling (trainable k, stored as
// kappa with k = exp(kappa)) -> kernel features -> optional DCAF.
struct CatParams {
    Tensor kappa; // scalar, k = exp(kappa), init k = 2
    KernelBank bank = KernelBank::default_bank();
    DcafParams dcaf;
    double eps = kRatioEps;

    static CatParams init(int dcaf_channels, int dcaf_kernel, Rng& rng);
    void register_params(ParamSet& set, const std::string& prefix,
                         bool include_dcaf);
    int out_channels(bool use_dcaf) const {
        return use_dcaf ? dcaf.channel_count : 3 * static_cast<int>(bank.size());
    }
};

Tensor image_to_tensor(const SrgbImage& img);
SrgbImage tensor_to_image(const Tensor& t); // clamps to [0,1]

// Differentiable pipeline producing the descriptor fed to the CNDN.
Tensor cat_forward(const SrgbImage& img, const CatParams& params, bool use_dcaf);

} // namespace picat
