#pragma once

#include "picat/metrics.hpp"
#include "picat/model.hpp"
#include "picat/perturb.hpp"

#include <string>
#include <vector>

namespace picat {

struct EvalReport {
    struct Record {
        std::string image;
        double psnr_db = 0.0;
        double ssim = 0.0;
        double sigma = 0.0;      // 0 for the clean pass
        std::string kind = "clean"; // clean | spatial | frequency
    };
    struct Aggregate {
        std::string kind;
        double sigma = 0.0;
        double mean_psnr_db = 0.0;
        double std_psnr_db = 0.0;
        double mean_ssim = 0.0;
        double rel_psnr_drop = 0.0; // (clean - noisy) / clean, 0 for clean
    };

    std::vector<Record> records;
    std::vector<Aggregate> aggregates;

    void compute_aggregates(); // recomputed from records; clean group required
    bool aggregates_consistent(double tol = 1e-9) const;

    std::string to_json() const;
    std::string to_csv() const; // columns: image,psnr_db,ssim,sigma,kind
};

EvalReport evaluate(const PicatModel& model, const Dataset& dataset,
                    const std::vector<PerturbSpec>& sweeps = {});

// Table (a)-style ablation: trains each toggle row with an identical seed and
// schedule. Standard rows: baseline, +CST, +CST+DCAF, full.
struct AblationEntry {
    ModelConfig model_config;
    TrainResult result;
};

std::vector<ModelConfig> standard_ablation_rows(const ModelConfig& base);
std::vector<AblationEntry> ablation_run(const std::vector<ModelConfig>& rows,
                                        const Dataset& dataset,
                                        const TrainConfig& train_cfg);
std::string ablation_json(const std::vector<AblationEntry>& entries,
                          const TrainConfig& train_cfg);

} // namespace picat
