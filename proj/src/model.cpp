#include "picat/model.hpp"
#include "picat/adam.hpp"
#include "picat/checkpoint.hpp"
#include "picat/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace picat {

void ModelConfig::validate() const {
    if (use_dcaf && !use_cst)
        throw TensorError("invalid variant: DCAF requires CST");
    if (embed_dim < 1 || dcaf_channels < 1 || backbone_dim < 1 ||
        backbone_blocks < 1 || dcaf_kernel < 1 || dcaf_kernel % 2 == 0)
        throw TensorError("invalid model config");
}

std::string ModelConfig::variant_name() const {
    if (use_cst && use_dcaf && use_cndn) return "full";
    if (!use_cst && !use_cndn) return "baseline";
    std::string name = "baseline";
    if (use_cst) name += "+cst";
    if (use_dcaf) name += "+dcaf";
    if (use_cndn) name += "+cndn";
    return name;
}

PicatModel PicatModel::init(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    PicatModel m;
    m.cfg = cfg;
    if (cfg.use_cst)
        m.cat = CatParams::init(cfg.dcaf_channels, cfg.dcaf_kernel, rng);
    const int y_channels = cfg.use_cst ? m.cat.out_channels(cfg.use_dcaf) : 3;
    if (cfg.use_cndn) {
        m.cndn = CndnParams::init(y_channels, cfg.embed_dim, rng);
    } else if (cfg.use_cst) {
        m.fuse = ConvStack::init(3 + y_channels, cfg.embed_dim, 3, rng,
                                 /*zero_last=*/true);
    }
    m.backbone = BackboneParams::init(cfg.backbone_dim, cfg.backbone_blocks, rng);
    return m;
}

ParamSet PicatModel::params() {
    ParamSet set;
    if (cfg.use_cst) cat.register_params(set, "cat.", cfg.use_dcaf);
    if (cfg.use_cndn)
        cndn.register_params(set, "cndn.");
    else if (cfg.use_cst)
        fuse.register_params(set, "fuse.");
    backbone.register_params(set, "backbone.");
    return set;
}

PicatModel::Forward PicatModel::forward(const SrgbImage& low) const {
    Tensor x = image_to_tensor(low);
    Forward out;
    if (cfg.use_cndn) {
        Tensor y = cfg.use_cst ? cat_forward(low, cat, cfg.use_dcaf) : x;
        CndnOutput dec = cndn_decompose(x, y, cndn);
        out.x_tilde = dec.x_tilde;
        out.noise = dec.noise;
    } else if (cfg.use_cst) {
        Tensor y = cat_forward(low, cat, cfg.use_dcaf);
        out.x_tilde =
            ops::add(x, conv_stack_forward(ops::concat_channels(x, y), fuse));
    } else {
        out.x_tilde = x;
    }
    out.enhanced = backbone_forward(out.x_tilde, backbone);
    return out;
}

SrgbImage PicatModel::enhance(const SrgbImage& low) const {
    return tensor_to_image(forward(low).enhanced);
}

namespace {

double window_mean(const std::vector<double>& values, size_t start, size_t count) {
    double acc = 0.0;
    for (size_t i = start; i < start + count; ++i) acc += values[i];
    return acc / static_cast<double>(count);
}

} // namespace

TrainResult train_loop(PicatModel& model, const Dataset& dataset,
                       const TrainConfig& cfg,
                       const std::string& checkpoint_path) {
    if (dataset.size() == 0) throw TensorError("train_loop: empty dataset");
    tune_allocator();
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.low[i].height != dataset.high[i].height ||
            dataset.low[i].width != dataset.high[i].width)
            throw TensorError("train_loop: low/high dimension mismatch at " +
                              dataset.names[i]);
    }

    // hold out the tail for validation; a single-pair dataset trains and
    // validates on the same pair
    size_t n_val = std::max<size_t>(
        1, static_cast<size_t>(std::llround(cfg.holdout_fraction *
                                            static_cast<double>(dataset.size()))));
    size_t n_train = dataset.size() > n_val ? dataset.size() - n_val : dataset.size();
    const size_t val_begin = dataset.size() > n_val ? n_train : 0;

    ParamSet params = model.params();
    Adam adam(params, cfg.lr0, cfg.total_steps);
    Rng rng(cfg.seed);

    auto validate_now = [&]() {
        double psnr_acc = 0.0, ssim_acc = 0.0;
        for (size_t i = val_begin; i < dataset.size(); ++i) {
            SrgbImage enhanced = model.enhance(dataset.low[i]);
            psnr_acc += psnr(enhanced, dataset.high[i]);
            ssim_acc += ssim(enhanced, dataset.high[i]);
        }
        const double n = static_cast<double>(dataset.size() - val_begin);
        return std::pair<double, double>(psnr_acc / n, ssim_acc / n);
    };

    TrainResult result;
    {
        double acc = 0.0;
        for (size_t i = val_begin; i < dataset.size(); ++i)
            acc += psnr(dataset.low[i], dataset.high[i]);
        result.psnr_degraded = acc / static_cast<double>(dataset.size() - val_begin);
    }

    for (int step = 0; step < cfg.total_steps; ++step) {
        Tensor total;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t idx = rng.uniform_index(n_train);
            const PatchSpec patch =
                random_patch_spec(dataset.low[idx], cfg.patch_size, rng.next_u64());
            SrgbImage low = crop(dataset.low[idx], patch);
            SrgbImage high = crop(dataset.high[idx], patch);
            PicatModel::Forward fwd;
            try {
                fwd = model.forward(low);
            } catch (const TensorError& e) {
                throw TensorError("non-finite forward at step " +
                                  std::to_string(step) + ": " + e.what());
            }
            Tensor item_loss = training_loss(fwd.enhanced, image_to_tensor(high),
                                             fwd.noise, cfg.loss);
            total = total.defined() ? ops::add(total, item_loss) : item_loss;
        }
        Tensor loss = ops::mul_scalar(total, 1.0 / cfg.batch_size);
        if (!std::isfinite(loss.item()))
            throw TensorError("non-finite loss at step " + std::to_string(step));
        result.step_losses.push_back(loss.item());
        backward(loss);
        adam.step();

        if (cfg.val_interval > 0 && (step + 1) % cfg.val_interval == 0) {
            auto [p, s] = validate_now();
            result.val_records.push_back({step + 1, p, s});
        }
    }

    auto [final_psnr, final_ssim] = validate_now();
    result.final_psnr_enhanced = final_psnr;
    result.final_ssim_enhanced = final_ssim;
    const size_t window =
        std::min<size_t>(50, std::max<size_t>(1, result.step_losses.size() / 2));
    result.smoothed_loss_start = window_mean(result.step_losses, 0, window);
    result.smoothed_loss_end =
        window_mean(result.step_losses, result.step_losses.size() - window, window);

    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, params);
    return result;
}

std::string TrainResult::manifest_json(const ModelConfig& mc,
                                       const TrainConfig& tc) const {
    nlohmann::json j;
    j["config"]["model"] = {{"variant", mc.variant_name()},
                            {"use_cst", mc.use_cst},
                            {"use_dcaf", mc.use_dcaf},
                            {"use_cndn", mc.use_cndn},
                            {"embed_dim", mc.embed_dim},
                            {"dcaf_channels", mc.dcaf_channels},
                            {"dcaf_kernel", mc.dcaf_kernel},
                            {"backbone_dim", mc.backbone_dim},
                            {"backbone_blocks", mc.backbone_blocks},
                            {"seed", mc.seed}};
    j["config"]["train"] = {{"patch_size", tc.patch_size},
                            {"batch_size", tc.batch_size},
                            {"total_steps", tc.total_steps},
                            {"lr0", tc.lr0},
                            {"seed", tc.seed},
                            {"lambda_rec", tc.loss.rec},
                            {"lambda_noise", tc.loss.noise}};
    // run id: stable hash of config and outcome
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    mix(mc.seed);
    mix(tc.seed);
    mix(static_cast<std::uint64_t>(tc.total_steps));
    mix(static_cast<std::uint64_t>(final_psnr_enhanced * 1e6));
    char run_id[17];
    std::snprintf(run_id, sizeof(run_id), "%016llx",
                  static_cast<unsigned long long>(h));
    j["run_id"] = run_id;
    j["metrics"]["final_psnr_enhanced_db"] = final_psnr_enhanced;
    j["metrics"]["final_ssim_enhanced"] = final_ssim_enhanced;
    j["metrics"]["psnr_degraded_db"] = psnr_degraded;
    j["metrics"]["psnr_gain_db"] = final_psnr_enhanced - psnr_degraded;
    j["metrics"]["psnr_gain_threshold_db"] = 3.0;
    j["metrics"]["smoothed_loss_start"] = smoothed_loss_start;
    j["metrics"]["smoothed_loss_end"] = smoothed_loss_end;
    for (const auto& rec : val_records)
        j["metrics"]["validation"].push_back({{"step", rec.step},
                                              {"psnr_db", rec.psnr_enhanced},
                                              {"ssim", rec.ssim_enhanced}});
    return j.dump(2);
}

} // namespace picat
