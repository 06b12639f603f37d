// Python bindings for the PiCat pipeline. Images cross the boundary as
// float64 numpy arrays of shape (H, W, 3) with values in [0, 1].

#include "picat/cat.hpp"
#include "picat/checkpoint.hpp"
#include "picat/image.hpp"
#include "picat/metrics.hpp"
#include "picat/model.hpp"
#include "picat/perturb.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstring>

namespace py = pybind11;
using namespace picat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

SrgbImage to_image(const Array& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw py::value_error("expected an array of shape (H, W, 3)");
    SrgbImage img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::memcpy(img.data.data(), arr.data(), sizeof(double) * img.data.size());
    return img;
}

Array from_image(const SrgbImage& img) {
    Array arr({static_cast<py::ssize_t>(img.height),
               static_cast<py::ssize_t>(img.width), py::ssize_t{3}});
    std::memcpy(arr.mutable_data(), img.data.data(),
                sizeof(double) * img.data.size());
    return arr;
}

Array ratios_to_array(const RatioDescriptor& desc) {
    Array arr({py::ssize_t{3}, static_cast<py::ssize_t>(desc.height),
               static_cast<py::ssize_t>(desc.width)});
    double* out = arr.mutable_data();
    const size_t plane = static_cast<size_t>(desc.height) * desc.width;
    for (int c = 0; c < 3; ++c)
        std::memcpy(out + c * plane, desc.channels[c].data(),
                    sizeof(double) * plane);
    return arr;
}

PerturbKind parse_kind(const std::string& kind) {
    if (kind == "spatial") return PerturbKind::Spatial;
    if (kind == "frequency") return PerturbKind::Frequency;
    throw py::value_error("kind must be 'spatial' or 'frequency'");
}

ModelConfig make_config(bool use_cst, bool use_dcaf, bool use_cndn,
                        int embed_dim, int dcaf_channels, int backbone_dim,
                        int backbone_blocks, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.use_cst = use_cst;
    cfg.use_dcaf = use_dcaf;
    cfg.use_cndn = use_cndn;
    cfg.embed_dim = embed_dim;
    cfg.dcaf_channels = dcaf_channels;
    cfg.backbone_dim = backbone_dim;
    cfg.backbone_blocks = backbone_blocks;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

} // namespace

PYBIND11_MODULE(_picat, m) {
    m.doc() = "PiCat low-light enhancement: color-aware transforms, "
              "content-noise decomposition, and evaluation utilities";

    m.def("load_png", [](const std::string& path) { return from_image(load_png(path)); },
          py::arg("path"), "Load a PNG as a (H, W, 3) float64 array in [0, 1].");
    m.def("save_png",
          [](const Array& img, const std::string& path) { save_png(to_image(img), path); },
          py::arg("image"), py::arg("path"));

    m.def("channel_ratios",
          [](const Array& img, double eps, bool log_domain) {
              return ratios_to_array(channel_ratios(
                  to_image(img), eps,
                  log_domain ? RatioDomain::Log : RatioDomain::Linear));
          },
          py::arg("image"), py::arg("eps") = kRatioEps,
          py::arg("log_domain") = false,
          "Per-pixel channel ratios (rg, rb, gb) as a (3, H, W) array.");

    m.def("cross_color_ratio",
          [](const Array& img, int y1, int x1, int y2, int x2, double eps) {
              return cross_color_ratio(to_image(img), y1, x1, y2, x2, eps);
          },
          py::arg("image"), py::arg("y1"), py::arg("x1"), py::arg("y2"),
          py::arg("x2"), py::arg("eps") = kRatioEps,
          "Cross-color ratios (rg, rb, gb) between two pixels.");

    m.def("density_scale_factor",
          [](double i_max, double k) {
              return density_scale_factor(i_max, DensityParams{k});
          },
          py::arg("i_max"), py::arg("k") = 2.0,
          "Density scaling (sin(pi*I/2) + tau)^(1/k).");

    m.def("kernel_features",
          [](const Array& img, double eps, bool log_domain) {
              RatioDescriptor desc = channel_ratios(
                  to_image(img), eps,
                  log_domain ? RatioDomain::Log : RatioDomain::Linear);
              FeatureStack f = kernel_features(desc, KernelBank::default_bank());
              Array arr({static_cast<py::ssize_t>(f.channels),
                         static_cast<py::ssize_t>(f.height),
                         static_cast<py::ssize_t>(f.width)});
              std::memcpy(arr.mutable_data(), f.data.data(),
                          sizeof(double) * f.data.size());
              return arr;
          },
          py::arg("image"), py::arg("eps") = kRatioEps,
          py::arg("log_domain") = false,
          "Ratio maps correlated with the default kernel bank, (6, H, W).");

    m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); },
          py::arg("a"), py::arg("b"));
    m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); },
          py::arg("a"), py::arg("b"));

    m.def("perturb",
          [](const Array& img, const std::string& kind, double sigma,
             std::uint64_t seed) {
              return from_image(
                  perturb(to_image(img), {parse_kind(kind), sigma, seed}));
          },
          py::arg("image"), py::arg("kind") = "spatial", py::arg("sigma") = 15.0,
          py::arg("seed") = 0,
          "Noise injection: 'spatial' (sigma on the 0-255 scale) or "
          "'frequency' (per-DFT-coefficient sigma).");

    m.def("degrade",
          [](const Array& img, double gain, double gamma, double noise_std,
             std::uint64_t seed) {
              return from_image(
                  degrade(to_image(img), {gain, gamma, noise_std, seed}));
          },
          py::arg("image"), py::arg("gain") = 0.25, py::arg("gamma") = 1.2,
          py::arg("noise_std") = 0.03, py::arg("seed") = 0,
          "Synthetic low-light degradation: clamp(gain*img^gamma + noise).");

    m.def("enhance",
          [](const Array& img, const std::string& checkpoint, bool use_cst,
             bool use_dcaf, bool use_cndn, int embed_dim, int dcaf_channels,
             int backbone_dim, int backbone_blocks, std::uint64_t seed) {
              PicatModel model = PicatModel::init(
                  make_config(use_cst, use_dcaf, use_cndn, embed_dim,
                              dcaf_channels, backbone_dim, backbone_blocks, seed));
              if (!checkpoint.empty()) {
                  ParamSet params = model.params();
                  load_checkpoint_into(checkpoint, params);
              }
              return from_image(model.enhance(to_image(img)));
          },
          py::arg("image"), py::arg("checkpoint") = "", py::arg("use_cst") = true,
          py::arg("use_dcaf") = true, py::arg("use_cndn") = true,
          py::arg("embed_dim") = 16, py::arg("dcaf_channels") = 8,
          py::arg("backbone_dim") = 16, py::arg("backbone_blocks") = 2,
          py::arg("seed") = 0,
          "Run the enhancement pipeline; without a checkpoint the freshly "
          "initialized model is the identity.");

    m.attr("RATIO_EPS") = kRatioEps;
    m.attr("RATIO_CLIP") = kRatioClip;
    m.attr("PSNR_CAP_DB") = kPsnrCapDb;
}
