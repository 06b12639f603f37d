#pragma once

#include "picat/backbone.hpp"
#include "picat/cat.hpp"
#include "picat/cndn.hpp"
#include "picat/image.hpp"

#include <optional>
#include <string>

namespace picat {

struct ModelConfig {
    bool use_cst = true;  // color space transform (descriptor branch = C_map)
    bool use_dcaf = true;
    bool use_cndn = true;
    int embed_dim = 16;     // CNDN width
    int dcaf_channels = 8;
    int dcaf_kernel = 3;
    int backbone_dim = 16;
    int backbone_blocks = 2;
    std::uint64_t seed = 0;

    void validate() const; // DCAF requires CST
    std::string variant_name() const;
};

// Full toy pipeline with ablation toggles. Descriptor branch feeds either the
// CNDN or, when the CNDN is off, a zero-initialized residual fusion conv.
struct PicatModel {
    ModelConfig cfg;
    CatParams cat;
    CndnParams cndn;
    ConvStack fuse; // used only when use_cndn is false but a descriptor exists
    BackboneParams backbone;

    static PicatModel init(const ModelConfig& cfg);

    ParamSet params(); // registration order fixed; prefixes cat./cndn./fuse./backbone.

    struct Forward {
        Tensor enhanced; // 3 x H x W, unclamped
        Tensor x_tilde;  // 3 x H x W
        Tensor noise;    // undefined when the CNDN is off
    };
    Forward forward(const SrgbImage& low) const;

    SrgbImage enhance(const SrgbImage& low) const; // clamped image output
};

struct TrainConfig {
    int patch_size = 64;
    int batch_size = 8;
    int total_steps = 500;
    double lr0 = 2e-4;
    std::uint64_t seed = 1;
    LossWeights loss;
    int val_interval = 100;
    double holdout_fraction = 0.1;
};

struct TrainResult {
    std::vector<double> step_losses;
    struct ValRecord {
        int step;
        double psnr_enhanced;
        double ssim_enhanced;
    };
    std::vector<ValRecord> val_records;
    double final_psnr_enhanced = 0.0;
    double final_ssim_enhanced = 0.0;
    double psnr_degraded = 0.0; // held-out low vs clean, the improvement baseline
    double smoothed_loss_start = 0.0;
    double smoothed_loss_end = 0.0;

    std::string manifest_json(const ModelConfig& mc, const TrainConfig& tc) const;
};

// Deterministic given the seed. Throws on an empty dataset or non-finite loss
// (message carries the step index).
TrainResult train_loop(PicatModel& model, const Dataset& dataset,
                       const TrainConfig& cfg,
                       const std::string& checkpoint_path = "");

} // namespace picat
