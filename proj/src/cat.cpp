#include "picat/cat.hpp"

#include <cmath>

namespace picat {

void KernelBank::add(Kernel2d kernel) {
    if (kernel.side < 1 || kernel.side % 2 == 0)
        throw TensorError("kernel side must be odd and positive");
    if (kernel.weights.size() != static_cast<size_t>(kernel.side) * kernel.side)
        throw TensorError("kernel weight count mismatch");
    double sum = 0.0;
    for (double w : kernel.weights) sum += w;
    const double target = kernel.tag == KernelTag::Smoothing ? 1.0 : 0.0;
    if (std::fabs(sum - target) >= 1e-12)
        throw TensorError("kernel '" + kernel.name + "' sum " +
                          std::to_string(sum) + " does not match its tag");
    kernels_.push_back(std::move(kernel));
}

Kernel2d KernelBank::gaussian3x3(double sigma) {
    Kernel2d k;
    k.name = "gaussian3x3";
    k.side = 3;
    k.tag = KernelTag::Smoothing;
    k.weights.resize(9);
    double sum = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k.weights[(dy + 1) * 3 + (dx + 1)] = w;
            sum += w;
        }
    double acc = 0.0;
    for (double& w : k.weights) {
        w /= sum;
        acc += w;
    }
    k.weights[4] += 1.0 - acc; // force exact unit sum
    return k;
}

Kernel2d KernelBank::laplacian3x3() {
    return {"laplacian3x3", 3, KernelTag::Differential,
            {0, 1, 0, 1, -4, 1, 0, 1, 0}};
}

KernelBank KernelBank::default_bank() {
    KernelBank bank;
    bank.add(gaussian3x3());
    bank.add(laplacian3x3());
    return bank;
}

RatioDescriptor channel_ratios(const SrgbImage& img, double eps,
                               RatioDomain domain) {
    if (eps <= 0.0) throw TensorError("channel_ratios: eps must be positive");
    RatioDescriptor desc;
    desc.height = img.height;
    desc.width = img.width;
    desc.domain = domain;
    const size_t n = img.pixel_count();
    for (auto& ch : desc.channels) ch.resize(n);
    static constexpr int num_idx[3] = {0, 0, 1}; // R, R, G
    static constexpr int den_idx[3] = {1, 2, 2}; // G, B, B
    for (size_t p = 0; p < n; ++p) {
        for (int ch = 0; ch < 3; ++ch) {
            double r = (img.data[p * 3 + num_idx[ch]] + eps) /
                       (img.data[p * 3 + den_idx[ch]] + eps);
            r = std::min(r, kRatioClip);
            desc.channels[ch][p] = domain == RatioDomain::Log ? std::log(r) : r;
        }
    }
    return desc;
}

std::array<double, 3> cross_color_ratio(const SrgbImage& img, int y1, int x1,
                                        int y2, int x2, double eps) {
    if (y1 < 0 || y1 >= img.height || x1 < 0 || x1 >= img.width || y2 < 0 ||
        y2 >= img.height || x2 < 0 || x2 >= img.width)
        throw TensorError("cross_color_ratio: pixel out of bounds");
    auto m = [&](int a, int b) {
        return (img.at(y1, x1, a) * img.at(y2, x2, b) + eps) /
               (img.at(y2, x2, a) * img.at(y1, x1, b) + eps);
    };
    return {m(0, 1), m(0, 2), m(1, 2)};
}

double density_scale_factor(double i_max, const DensityParams& params) {
    if (params.k <= 0.0) throw TensorError("density_scale: k must be positive");
    const double pi = 3.14159265358979323846;
    return std::pow(std::sin(pi * i_max / 2.0) + DensityParams::tau, 1.0 / params.k);
}

RatioDescriptor density_scale(const RatioDescriptor& ratios,
                              const LuminanceMap& i_max,
                              const DensityParams& params) {
    if (ratios.domain != RatioDomain::Linear)
        throw TensorError("density_scale: ratios must be in the linear domain");
    if (ratios.height != i_max.height || ratios.width != i_max.width)
        throw TensorError("density_scale: spatial dims mismatch");
    RatioDescriptor out = ratios;
    for (size_t p = 0; p < i_max.data.size(); ++p) {
        const double s = density_scale_factor(i_max.data[p], params);
        for (int ch = 0; ch < 3; ++ch) out.channels[ch][p] *= s;
    }
    return out;
}

namespace {

Tensor descriptor_to_tensor(const RatioDescriptor& desc) {
    std::vector<double> data;
    data.reserve(desc.channels[0].size() * 3);
    for (const auto& ch : desc.channels)
        data.insert(data.end(), ch.begin(), ch.end());
    return Tensor({3, desc.height, desc.width}, std::move(data));
}

// constant conv weight realizing "each ratio channel x each bank kernel";
// output channel i*3+c applies kernel i to ratio channel c
Tensor bank_weight(const KernelBank& bank, int side) {
    const int out_ch = static_cast<int>(bank.size()) * 3;
    Tensor w = Tensor::zeros({out_ch, 3, side, side});
    for (size_t i = 0; i < bank.size(); ++i) {
        const auto& k = bank.kernels()[i];
        for (int c = 0; c < 3; ++c) {
            const int co = static_cast<int>(i) * 3 + c;
            for (int t = 0; t < side * side; ++t)
                w.data()[((static_cast<size_t>(co) * 3 + c) * side + t / side) * side +
                         t % side] = k.weights[t];
        }
    }
    return w;
}

int bank_side(const KernelBank& bank) {
    if (bank.size() == 0) throw TensorError("kernel bank is empty");
    int side = bank.kernels()[0].side;
    for (const auto& k : bank.kernels())
        if (k.side != side)
            throw TensorError("kernel bank sides must match for stacked features");
    return side;
}

Tensor kernel_features_op(const Tensor& desc3, const KernelBank& bank) {
    const int side = bank_side(bank);
    if (side > desc3.dim(1) || side > desc3.dim(2))
        throw TensorError("kernel_features: kernel larger than image");
    return ops::conv2d(desc3, bank_weight(bank, side), Tensor(),
                       ops::Pad::Replicate);
}

} // namespace

FeatureStack kernel_features(const RatioDescriptor& desc, const KernelBank& bank) {
    Tensor out = kernel_features_op(descriptor_to_tensor(desc), bank);
    FeatureStack stack;
    stack.height = desc.height;
    stack.width = desc.width;
    stack.channels = out.dim(0);
    stack.data = out.data();
    return stack;
}

DcafParams DcafParams::init(int in_channels, int channel_count, int kernel_size,
                            Rng& rng) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw TensorError("DCAF kernel size must be odd");
    DcafParams p;
    p.in_channels = in_channels;
    p.channel_count = channel_count;
    p.kernel_size = kernel_size;
    const int k = 3; // expansion convs are 3x3
    auto he_init = [&](int co, int ci) {
        Tensor t = Tensor::zeros({co, ci, k, k}, true);
        const double std = std::sqrt(2.0 / (ci * k * k));
        for (double& v : t.data()) v = rng.normal(0.0, std);
        return t;
    };
    p.f_weight = he_init(channel_count, in_channels);
    p.f_bias = Tensor::zeros({channel_count}, true);
    p.h_weight = he_init(channel_count, in_channels);
    p.h_bias = Tensor::zeros({channel_count}, true);
    return p;
}

void DcafParams::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + "f_weight", f_weight);
    set.add(prefix + "f_bias", f_bias);
    set.add(prefix + "h_weight", h_weight);
    set.add(prefix + "h_bias", h_bias);
}

Tensor dcaf_forward(const Tensor& c_map, const DcafParams& params) {
    if (c_map.shape().size() != 3 || c_map.dim(0) != params.in_channels)
        throw TensorError("dcaf_forward: channel count mismatch");
    if (c_map.dim(1) < params.kernel_size || c_map.dim(2) < params.kernel_size)
        throw TensorError("dcaf_forward: spatial dims smaller than kernel");
    Tensor f = ops::conv2d(c_map, params.f_weight, params.f_bias, ops::Pad::Replicate);
    Tensor g = ops::adaptive_avg_pool(f, params.kernel_size);
    Tensor h = ops::conv2d(c_map, params.h_weight, params.h_bias, ops::Pad::Replicate);
    return ops::depthwise_conv2d(h, g, ops::Pad::Replicate);
}

CatParams CatParams::init(int dcaf_channels, int dcaf_kernel, Rng& rng) {
    CatParams p;
    p.kappa = Tensor::scalar(std::log(2.0), true); // k = 2 at init
    p.dcaf = DcafParams::init(3 * static_cast<int>(p.bank.size()), dcaf_channels,
                              dcaf_kernel, rng);
    return p;
}

void CatParams::register_params(ParamSet& set, const std::string& prefix,
                                bool include_dcaf) {
    set.add(prefix + "kappa", kappa);
    if (include_dcaf) dcaf.register_params(set, prefix + "dcaf.");
}

Tensor image_to_tensor(const SrgbImage& img) {
    std::vector<double> data(img.pixel_count() * 3);
    const size_t n = img.pixel_count();
    for (size_t p = 0; p < n; ++p)
        for (int c = 0; c < 3; ++c) data[static_cast<size_t>(c) * n + p] = img.data[p * 3 + c];
    return Tensor({3, img.height, img.width}, std::move(data));
}

SrgbImage tensor_to_image(const Tensor& t) {
    if (t.shape().size() != 3 || t.dim(0) != 3)
        throw TensorError("tensor_to_image: expected 3xHxW");
    SrgbImage img(t.dim(1), t.dim(2));
    const size_t n = img.pixel_count();
    for (size_t p = 0; p < n; ++p)
        for (int c = 0; c < 3; ++c)
            img.data[p * 3 + c] =
                std::clamp(t.data()[static_cast<size_t>(c) * n + p], 0.0, 1.0);
    return img;
}

Tensor cat_forward(const SrgbImage& img, const CatParams& params, bool use_dcaf) {
    RatioDescriptor ratios = channel_ratios(img, params.eps, RatioDomain::Linear);
    LuminanceMap imax = intensity_max(img);

    Tensor ratios_t = descriptor_to_tensor(ratios);
    // log of the density base, repeated across the 3 ratio channels
    const size_t n = imax.data.size();
    std::vector<double> log_base(n * 3);
    const double pi = 3.14159265358979323846;
    for (size_t p = 0; p < n; ++p) {
        double b = std::log(std::sin(pi * imax.data[p] / 2.0) + DensityParams::tau);
        log_base[p] = b;
        log_base[n + p] = b;
        log_base[2 * n + p] = b;
    }
    Tensor log_base_t({3, img.height, img.width}, std::move(log_base));

    // S_k = exp(log(base) / k), k = exp(kappa)
    Tensor inv_k = ops::exp(ops::mul_scalar(params.kappa, -1.0));
    Tensor s_map = ops::exp(ops::mul_scalar_tensor(log_base_t, inv_k));
    Tensor c_map = ops::mul(ratios_t, s_map);

    Tensor feats = kernel_features_op(c_map, params.bank);
    if (!use_dcaf) return feats;
    return dcaf_forward(feats, params.dcaf);
}

} // namespace picat
