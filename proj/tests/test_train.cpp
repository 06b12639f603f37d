#include "doctest.h"

#include "picat/checkpoint.hpp"
#include "picat/eval.hpp"
#include "picat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

using namespace picat;

namespace {

Dataset tiny_dataset(int count = 6, int size = 24) {
    DegradeSpec spec;
    spec.gain = 0.5;
    spec.gamma = 1.1;
    spec.noise_std = 0.01;
    return make_synthetic_dataset(count, size, spec, 99);
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.embed_dim = 6;
    cfg.dcaf_channels = 4;
    cfg.backbone_dim = 6;
    cfg.backbone_blocks = 1;
    cfg.seed = 11;
    return cfg;
}

} // namespace

TEST_CASE("model config validation and variant names") {
    ModelConfig cfg;
    cfg.validate();
    CHECK(cfg.variant_name() == "full");
    cfg.use_cndn = false;
    cfg.validate();
    cfg.use_dcaf = false;
    cfg.use_cst = false;
    cfg.validate();
    CHECK(cfg.variant_name() == "baseline");
    cfg.use_dcaf = true;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("model is the identity at init") {
    ModelConfig cfg = small_config();
    Dataset data = tiny_dataset(2);
    for (bool cndn : {true, false}) {
        cfg.use_cndn = cndn;
        PicatModel model = PicatModel::init(cfg);
        SrgbImage out = model.enhance(data.low[0]);
        double worst = 0.0;
        for (size_t i = 0; i < out.data.size(); ++i)
            worst = std::max(worst, std::fabs(out.data[i] - data.low[0].data[i]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("param names carry the module prefixes") {
    PicatModel model = PicatModel::init(small_config());
    ParamSet p = model.params();
    CHECK(p.find("cat.kappa") != nullptr);
    CHECK(p.find("cndn.embed_x.w1") != nullptr);
    CHECK(p.find("backbone.out_weight") != nullptr);
    bool prefixed = true;
    for (auto& [name, t] : p.items)
        prefixed = prefixed && (name.rfind("cat.", 0) == 0 ||
                                name.rfind("cndn.", 0) == 0 ||
                                name.rfind("fuse.", 0) == 0 ||
                                name.rfind("backbone.", 0) == 0);
    CHECK(prefixed);
}

TEST_CASE("training is deterministic in the seed and frozen at lr 0") {
    Dataset data = tiny_dataset();
    TrainConfig tc;
    tc.patch_size = 16;
    tc.batch_size = 2;
    tc.total_steps = 4;
    tc.val_interval = 2;

    ModelConfig cfg = small_config();
    PicatModel m1 = PicatModel::init(cfg);
    PicatModel m2 = PicatModel::init(cfg);
    TrainResult r1 = train_loop(m1, data, tc);
    TrainResult r2 = train_loop(m2, data, tc);
    REQUIRE(r1.step_losses.size() == 4);
    CHECK(r1.step_losses == r2.step_losses);
    ParamSet p1 = m1.params(), p2 = m2.params();
    for (size_t i = 0; i < p1.size(); ++i)
        CHECK(p1.items[i].second.data() == p2.items[i].second.data());

    // lr 0 leaves every parameter byte-identical
    tc.lr0 = 0.0;
    PicatModel m3 = PicatModel::init(cfg);
    PicatModel m0 = PicatModel::init(cfg);
    train_loop(m3, data, tc);
    ParamSet p3 = m3.params(), p0 = m0.params();
    for (size_t i = 0; i < p3.size(); ++i)
        CHECK(p3.items[i].second.data() == p0.items[i].second.data());

    CHECK_THROWS(train_loop(m3, Dataset{}, tc));
}

TEST_CASE("train_loop records losses and writes a loadable checkpoint") {
    Dataset data = tiny_dataset();
    TrainConfig tc;
    tc.patch_size = 16;
    tc.batch_size = 2;
    tc.total_steps = 6;
    tc.val_interval = 3;
    tc.lr0 = 1e-3;

    ModelConfig cfg = small_config();
    PicatModel model = PicatModel::init(cfg);
    std::string ck = "/tmp/picat_train_test.pict";
    TrainResult r = train_loop(model, data, tc, ck);
    CHECK(r.step_losses.size() == 6);
    for (double l : r.step_losses) CHECK(std::isfinite(l));
    CHECK(!r.val_records.empty());
    CHECK(r.psnr_degraded > 0.0);
    CHECK(r.final_psnr_enhanced > 0.0);

    // manifest is valid JSON-ish and echoes the config
    std::string mj = r.manifest_json(cfg, tc);
    CHECK(mj.find("\"total_steps\": 6") != std::string::npos);
    CHECK(mj.find("run_id") != std::string::npos);

    PicatModel fresh = PicatModel::init(cfg);
    ParamSet fp = fresh.params();
    load_checkpoint_into(ck, fp);
    ParamSet tp = model.params();
    for (size_t i = 0; i < fp.size(); ++i)
        for (size_t j = 0; j < fp.items[i].second.data().size(); ++j)
            CHECK(fp.items[i].second.data()[j] ==
                  static_cast<double>(
                      static_cast<float>(tp.items[i].second.data()[j])));
    std::remove(ck.c_str());
}

TEST_CASE("evaluate: identity model on a clean-equals-low dataset caps at 100 dB") {
    Dataset data = tiny_dataset(3);
    data.low = data.high; // enhanced = low = high at init
    ModelConfig cfg = small_config();
    PicatModel model = PicatModel::init(cfg);

    std::vector<PerturbSpec> sweeps;
    sweeps.push_back({PerturbKind::Spatial, 15.0, 5});
    EvalReport rep = evaluate(model, data, sweeps);
    REQUIRE(rep.records.size() == 6); // clean + one sweep
    for (int i = 0; i < 3; ++i) {
        CHECK(rep.records[i].kind == "clean");
        CHECK(rep.records[i].psnr_db == kPsnrCapDb);
    }
    CHECK(rep.aggregates_consistent());

    // perturbed pass must be strictly worse than clean
    double clean_mean = 0.0, noisy_mean = 0.0;
    for (auto& agg : rep.aggregates) {
        if (agg.kind == "clean") clean_mean = agg.mean_psnr_db;
        if (agg.kind == "spatial") noisy_mean = agg.mean_psnr_db;
    }
    CHECK(noisy_mean < clean_mean);

    // serializations contain every record
    std::string csv = rep.to_csv();
    CHECK(csv.find("image,psnr_db,ssim,sigma,kind") == 0);
    size_t lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 7); // header + 6 records
    CHECK(rep.to_json().find("\"aggregates\"") != std::string::npos);
}

TEST_CASE("standard ablation rows toggle the documented modules") {
    ModelConfig base = small_config();
    auto rows = standard_ablation_rows(base);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].variant_name() == "baseline");
    CHECK(!rows[0].use_cst);
    CHECK(rows[1].use_cst);
    CHECK(!rows[1].use_dcaf);
    CHECK(rows[2].use_dcaf);
    CHECK(!rows[2].use_cndn);
    CHECK(rows[3].use_cndn);
    for (auto& r : rows) {
        r.validate();
        CHECK(r.seed == base.seed);
    }
}

TEST_CASE("ablation_run trains every row and serializes") {
    Dataset data = tiny_dataset(4, 20);
    TrainConfig tc;
    tc.patch_size = 16;
    tc.batch_size = 2;
    tc.total_steps = 2;
    tc.val_interval = 2;

    auto rows = standard_ablation_rows(small_config());
    auto entries = ablation_run(rows, data, tc);
    REQUIRE(entries.size() == 4);
    for (auto& e : entries) {
        CHECK(e.result.step_losses.size() == 2);
        CHECK(std::isfinite(e.result.final_psnr_enhanced));
    }
    std::string js = ablation_json(entries, tc);
    CHECK(js.find("baseline") != std::string::npos);
    CHECK(js.find("full") != std::string::npos);
}
