#include "picat/eval.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <sstream>

namespace picat {

namespace {

std::string kind_name(PerturbKind kind) {
    return kind == PerturbKind::Spatial ? "spatial" : "frequency";
}

} // namespace

void EvalReport::compute_aggregates() {
    aggregates.clear();
    std::map<std::pair<std::string, double>, std::vector<const Record*>> groups;
    for (const auto& rec : records) groups[{rec.kind, rec.sigma}].push_back(&rec);

    double clean_mean = 0.0;
    if (auto it = groups.find({"clean", 0.0}); it != groups.end()) {
        for (const auto* r : it->second) clean_mean += r->psnr_db;
        clean_mean /= static_cast<double>(it->second.size());
    }

    for (const auto& [key, recs] : groups) {
        Aggregate agg;
        agg.kind = key.first;
        agg.sigma = key.second;
        const double n = static_cast<double>(recs.size());
        for (const auto* r : recs) {
            agg.mean_psnr_db += r->psnr_db;
            agg.mean_ssim += r->ssim;
        }
        agg.mean_psnr_db /= n;
        agg.mean_ssim /= n;
        for (const auto* r : recs) {
            const double d = r->psnr_db - agg.mean_psnr_db;
            agg.std_psnr_db += d * d;
        }
        agg.std_psnr_db = std::sqrt(agg.std_psnr_db / n);
        if (agg.kind != "clean" && clean_mean > 0.0)
            agg.rel_psnr_drop = (clean_mean - agg.mean_psnr_db) / clean_mean;
        aggregates.push_back(agg);
    }
}

bool EvalReport::aggregates_consistent(double tol) const {
    EvalReport check;
    check.records = records;
    check.compute_aggregates();
    if (check.aggregates.size() != aggregates.size()) return false;
    for (size_t i = 0; i < aggregates.size(); ++i) {
        const auto& a = aggregates[i];
        const auto& b = check.aggregates[i];
        if (a.kind != b.kind || std::fabs(a.sigma - b.sigma) > tol ||
            std::fabs(a.mean_psnr_db - b.mean_psnr_db) > tol ||
            std::fabs(a.std_psnr_db - b.std_psnr_db) > tol ||
            std::fabs(a.mean_ssim - b.mean_ssim) > tol ||
            std::fabs(a.rel_psnr_drop - b.rel_psnr_drop) > tol)
            return false;
    }
    return true;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    for (const auto& rec : records)
        j["records"].push_back({{"image", rec.image},
                                {"psnr_db", rec.psnr_db},
                                {"ssim", rec.ssim},
                                {"sigma", rec.sigma},
                                {"kind", rec.kind}});
    for (const auto& agg : aggregates)
        j["aggregates"].push_back({{"kind", agg.kind},
                                   {"sigma", agg.sigma},
                                   {"mean_psnr_db", agg.mean_psnr_db},
                                   {"std_psnr_db", agg.std_psnr_db},
                                   {"mean_ssim", agg.mean_ssim},
                                   {"rel_psnr_drop", agg.rel_psnr_drop}});
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "image,psnr_db,ssim,sigma,kind\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& rec : records)
        os << rec.image << ',' << rec.psnr_db << ',' << rec.ssim << ','
           << rec.sigma << ',' << rec.kind << '\n';
    return os.str();
}

EvalReport evaluate(const PicatModel& model, const Dataset& dataset,
                    const std::vector<PerturbSpec>& sweeps) {
    if (dataset.size() == 0) throw ImageError("evaluate: empty dataset");
    EvalReport report;
    for (size_t i = 0; i < dataset.size(); ++i) {
        SrgbImage enhanced = model.enhance(dataset.low[i]);
        report.records.push_back({dataset.names[i], psnr(enhanced, dataset.high[i]),
                                  ssim(enhanced, dataset.high[i]), 0.0, "clean"});
    }
    for (const auto& spec : sweeps) {
        for (size_t i = 0; i < dataset.size(); ++i) {
            PerturbSpec per_image = spec;
            per_image.seed = spec.seed + i; // independent noise per image
            SrgbImage noisy = perturb(dataset.low[i], per_image);
            SrgbImage enhanced = model.enhance(noisy);
            report.records.push_back({dataset.names[i],
                                      psnr(enhanced, dataset.high[i]),
                                      ssim(enhanced, dataset.high[i]), spec.sigma,
                                      kind_name(spec.kind)});
        }
    }
    report.compute_aggregates();
    return report;
}

std::vector<ModelConfig> standard_ablation_rows(const ModelConfig& base) {
    std::vector<ModelConfig> rows(4, base);
    rows[0].use_cst = false;
    rows[0].use_dcaf = false;
    rows[0].use_cndn = false;
    rows[1].use_cst = true;
    rows[1].use_dcaf = false;
    rows[1].use_cndn = false;
    rows[2].use_cst = true;
    rows[2].use_dcaf = true;
    rows[2].use_cndn = false;
    rows[3].use_cst = true;
    rows[3].use_dcaf = true;
    rows[3].use_cndn = true;
    return rows;
}

std::vector<AblationEntry> ablation_run(const std::vector<ModelConfig>& rows,
                                        const Dataset& dataset,
                                        const TrainConfig& train_cfg) {
    std::vector<AblationEntry> entries;
    for (const auto& row : rows) {
        row.validate();
        PicatModel model = PicatModel::init(row);
        AblationEntry entry;
        entry.model_config = row;
        entry.result = train_loop(model, dataset, train_cfg);
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::string ablation_json(const std::vector<AblationEntry>& entries,
                          const TrainConfig& train_cfg) {
    nlohmann::json j;
    j["total_steps"] = train_cfg.total_steps;
    j["seed"] = train_cfg.seed;
    for (const auto& entry : entries)
        j["rows"].push_back(
            {{"variant", entry.model_config.variant_name()},
             {"use_cst", entry.model_config.use_cst},
             {"use_dcaf", entry.model_config.use_dcaf},
             {"use_cndn", entry.model_config.use_cndn},
             {"final_psnr_db", entry.result.final_psnr_enhanced},
             {"final_ssim", entry.result.final_ssim_enhanced}});
    return j.dump(2);
}

} // namespace picat
