// picat: CLI front end for the PiCat enhancement pipeline.
//
// Subcommands: transform, train, enhance, eval, perturb, gradcheck, report.
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 check failure.
// Config precedence: built-in defaults <- --config JSON file <- flags.

#include "picat/cat.hpp"
#include "picat/checkpoint.hpp"
#include "picat/eval.hpp"
#include "picat/gradcheck.hpp"
#include "picat/model.hpp"
#include "picat/perturb.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace picat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheckFailed = 3;

int worker_count() {
    // the only environment variable the tool consults
    if (const char* env = std::getenv("PICAT_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1)
            throw std::runtime_error("PICAT_THREADS must be a positive integer");
        return static_cast<int>(n);
    }
    return 1;
}

// data-parallel helper for loading/evaluation stages
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next++; i < count; i = next++) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Applies --config file values to options the command line left untouched,
// so the effective precedence is defaults <- file <- flags. Unknown keys are
// hard errors.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const std::exception& e) {
        throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!cfg.is_object())
        throw CLI::ValidationError("--config", "top level must be an object");
    for (auto& [key, value] : cfg.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || key == "config")
            throw CLI::ValidationError("--config", "unknown key: " + key);
        if (opt->count() > 0) continue; // flag given explicitly wins
        std::string text = value.is_string() ? value.get<std::string>() : value.dump();
        if (opt->get_expected_min() == 0) {
            // boolean flag: accept true/false
            if (text == "true")
                opt->add_result("true");
            else if (text != "false")
                throw CLI::ValidationError("--config", key + " must be true or false");
        } else {
            opt->add_result(text);
        }
    }
    // re-run callbacks so the new results land in the bound variables
    for (CLI::Option* opt : cmd->get_options())
        if (opt->count() > 0) opt->run_callback();
}

// every run writes a manifest, success or not
struct ManifestWriter {
    std::string path;
    json doc;

    explicit ManifestWriter(std::string subcommand)
        : doc({{"tool", "picat"}, {"subcommand", std::move(subcommand)},
               {"status", "running"}}) {}

    void finish(const std::string& status, const std::string& error = "") {
        doc["status"] = status;
        if (!error.empty()) doc["error"] = error;
        if (path.empty()) return;
        fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(path);
        out << doc.dump(2) << "\n";
    }
};

std::vector<std::string> list_inputs(const std::string& input) {
    std::vector<std::string> files;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input))
            if (e.path().extension() == ".png") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(input);
    }
    if (files.empty()) throw std::runtime_error("no .png inputs under " + input);
    return files;
}

SrgbImage linearize(const SrgbImage& img) {
    SrgbImage out = img;
    for (double& v : out.data) v = std::pow(v, 2.2);
    return out;
}

// per-channel min-max normalized grayscale heatmap
SrgbImage heatmap(const FeatureStack& fs, int channel) {
    SrgbImage img(fs.height, fs.width);
    double lo = fs.at(channel, 0, 0), hi = lo;
    for (int y = 0; y < fs.height; ++y)
        for (int x = 0; x < fs.width; ++x) {
            lo = std::min(lo, fs.at(channel, y, x));
            hi = std::max(hi, fs.at(channel, y, x));
        }
    const double span = hi - lo;
    for (int y = 0; y < fs.height; ++y)
        for (int x = 0; x < fs.width; ++x) {
            double v = span > 0 ? (fs.at(channel, y, x) - lo) / span : 0.5;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
    return img;
}

struct CommonModelFlags {
    bool no_cst = false, no_dcaf = false, no_cndn = false;
    int embed_dim = 16, dcaf_channels = 8, backbone_dim = 16, backbone_blocks = 2;

    void attach(CLI::App* cmd) {
        cmd->add_flag("--no-cst", no_cst, "disable the color transform branch");
        cmd->add_flag("--no-dcaf", no_dcaf, "disable the dynamic color-aware filter");
        cmd->add_flag("--no-cndn", no_cndn, "disable the content-noise decomposition");
        cmd->add_option("--embed-dim", embed_dim, "CNDN embedding width");
        cmd->add_option("--dcaf-channels", dcaf_channels, "DCAF channel count");
        cmd->add_option("--backbone-dim", backbone_dim, "backbone width");
        cmd->add_option("--backbone-blocks", backbone_blocks, "backbone depth");
    }

    ModelConfig to_config(std::uint64_t seed) const {
        ModelConfig cfg;
        cfg.use_cst = !no_cst;
        cfg.use_dcaf = !no_cst && !no_dcaf;
        cfg.use_cndn = !no_cndn;
        cfg.embed_dim = embed_dim;
        cfg.dcaf_channels = dcaf_channels;
        cfg.backbone_dim = backbone_dim;
        cfg.backbone_blocks = backbone_blocks;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }

    json echo() const {
        return {{"use_cst", !no_cst},       {"use_dcaf", !no_cst && !no_dcaf},
                {"use_cndn", !no_cndn},     {"embed_dim", embed_dim},
                {"dcaf_channels", dcaf_channels}, {"backbone_dim", backbone_dim},
                {"backbone_blocks", backbone_blocks}};
    }
};

Dataset load_or_synthesize(const std::string& data_dir, int synth, int synth_size,
                           const DegradeSpec& spec, std::uint64_t seed) {
    if (!data_dir.empty()) return load_dataset_dir(data_dir);
    if (synth <= 0)
        throw std::runtime_error("either --data or --synth N is required");
    return make_synthetic_dataset(synth, synth_size, spec, seed);
}

// ---------------------------------------------------------------- transform

int cmd_transform(const std::string& input, const std::string& out_dir,
                  const std::string& domain, const std::string& kernel,
                  bool do_linearize, double k, ManifestWriter& manifest) {
    const RatioDomain dom = domain == "log" ? RatioDomain::Log : RatioDomain::Linear;
    const KernelBank full = KernelBank::default_bank();
    KernelBank bank;
    for (const Kernel2d& kn : full.kernels())
        if (kernel == "all" || kernel == kn.name) bank.add(kn);
    if (bank.size() == 0) throw std::runtime_error("unknown kernel: " + kernel);

    fs::create_directories(out_dir);
    auto files = list_inputs(input);
    json outputs = json::array();
    for (const std::string& file : files) {
        SrgbImage img = load_png(file);
        if (do_linearize) img = linearize(img);
        RatioDescriptor desc = channel_ratios(img, kRatioEps, dom);
        if (dom == RatioDomain::Linear) {
            DensityParams dp;
            dp.k = k;
            desc = density_scale(desc, intensity_max(img), dp);
        }
        FeatureStack feat = kernel_features(desc, bank);

        const std::string stem = fs::path(file).stem().string();
        Tensor dump({feat.channels, feat.height, feat.width}, feat.data);
        const std::string pict = (fs::path(out_dir) / (stem + ".pict")).string();
        save_checkpoint(pict, {{"c_map", dump}});
        json entry = {{"input", file}, {"tensors", pict}, {"heatmaps", json::array()}};
        for (int c = 0; c < feat.channels; ++c) {
            std::string hp =
                (fs::path(out_dir) / (stem + ".heat" + std::to_string(c) + ".png"))
                    .string();
            save_png(heatmap(feat, c), hp);
            entry["heatmaps"].push_back(hp);
        }
        outputs.push_back(entry);
    }
    manifest.doc["outputs"] = outputs;
    std::cout << "transform: wrote " << files.size() << " descriptor set(s) to "
              << out_dir << "\n";
    return kExitOk;
}

// -------------------------------------------------------------------- train

int cmd_train(const std::string& data_dir, int synth, int synth_size,
              const DegradeSpec& degrade_spec, const CommonModelFlags& mf,
              TrainConfig tc, double train_perturb_sigma,
              const std::string& checkpoint_path, ManifestWriter& manifest) {
    Dataset data = load_or_synthesize(data_dir, synth, synth_size, degrade_spec,
                                      tc.seed + 1000);
    if (train_perturb_sigma > 0.0) {
        // optional train-time disturbance on the inputs
        for (size_t i = 0; i < data.low.size(); ++i)
            data.low[i] = perturb(data.low[i], {PerturbKind::Spatial,
                                                train_perturb_sigma, tc.seed + i});
    }
    ModelConfig mc = mf.to_config(tc.seed);
    PicatModel model = PicatModel::init(mc);
    TrainResult result = train_loop(model, data, tc, checkpoint_path);
    manifest.doc.update(json::parse(result.manifest_json(mc, tc)));
    manifest.doc["config"]["train_perturb_sigma"] = train_perturb_sigma;
    manifest.doc["config"]["dataset"] =
        data_dir.empty() ? json{{"synth", synth}, {"size", synth_size},
                                {"gain", degrade_spec.gain},
                                {"gamma", degrade_spec.gamma},
                                {"noise_std", degrade_spec.noise_std}}
                         : json{{"dir", data_dir}};
    std::cout << "train: " << tc.total_steps << " steps, final PSNR "
              << result.final_psnr_enhanced << " dB (degraded input "
              << result.psnr_degraded << " dB)\n";
    return kExitOk;
}

// ------------------------------------------------------------------ enhance

int cmd_enhance(const std::string& checkpoint_path, const std::string& input,
                const std::string& out_dir, const CommonModelFlags& mf,
                std::uint64_t seed, ManifestWriter& manifest) {
    PicatModel model = PicatModel::init(mf.to_config(seed));
    if (!checkpoint_path.empty()) {
        ParamSet params = model.params();
        load_checkpoint_into(checkpoint_path, params);
    }
    fs::create_directories(out_dir);
    auto files = list_inputs(input);
    std::vector<std::string> written(files.size());
    parallel_for(static_cast<int>(files.size()), worker_count(), [&](int i) {
        SrgbImage out = model.enhance(load_png(files[i]));
        std::string path =
            (fs::path(out_dir) / fs::path(files[i]).filename()).string();
        save_png(out, path);
        written[i] = path;
    });
    manifest.doc["outputs"] = written;
    std::cout << "enhance: wrote " << written.size() << " image(s) to " << out_dir
              << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- eval

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             int synth, int synth_size, const DegradeSpec& degrade_spec,
             const CommonModelFlags& mf, const std::vector<double>& sweep,
             const std::string& kind, std::uint64_t seed,
             const std::string& out_dir, ManifestWriter& manifest) {
    PicatModel model = PicatModel::init(mf.to_config(seed));
    if (!checkpoint_path.empty()) {
        ParamSet params = model.params();
        load_checkpoint_into(checkpoint_path, params);
    }
    Dataset data = load_or_synthesize(data_dir, synth, synth_size, degrade_spec,
                                      seed + 1000);
    const PerturbKind pk =
        kind == "frequency" ? PerturbKind::Frequency : PerturbKind::Spatial;
    std::vector<PerturbSpec> specs;
    for (double sigma : sweep) specs.push_back({pk, sigma, seed});

    EvalReport report = evaluate(model, data, specs);
    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
    const std::string json_path = (fs::path(out_dir) / "report.json").string();
    std::ofstream(csv_path) << report.to_csv();
    std::ofstream(json_path) << report.to_json();
    manifest.doc["outputs"] = {csv_path, json_path};
    manifest.doc["aggregates"] = json::parse(report.to_json())["aggregates"];
    for (const auto& agg : report.aggregates)
        std::cout << "eval: " << agg.kind << " sigma=" << agg.sigma << " PSNR "
                  << agg.mean_psnr_db << " dB, SSIM " << agg.mean_ssim
                  << ", rel drop " << agg.rel_psnr_drop << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ perturb

int cmd_perturb(const std::string& input, const std::string& out_dir,
                const std::string& kind, double sigma, std::uint64_t seed,
                ManifestWriter& manifest) {
    const PerturbKind pk =
        kind == "frequency" ? PerturbKind::Frequency : PerturbKind::Spatial;
    fs::create_directories(out_dir);
    auto files = list_inputs(input);
    std::vector<std::string> written(files.size());
    parallel_for(static_cast<int>(files.size()), worker_count(), [&](int i) {
        SrgbImage out =
            perturb(load_png(files[i]), {pk, sigma, seed + static_cast<std::uint64_t>(i)});
        std::string path =
            (fs::path(out_dir) / fs::path(files[i]).filename()).string();
        save_png(out, path);
        written[i] = path;
    });
    manifest.doc["outputs"] = written;
    std::cout << "perturb: wrote " << written.size() << " image(s) to " << out_dir
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const std::string& module, std::uint64_t seed, int samples,
                  ManifestWriter& manifest) {
    Rng rng(seed);
    json results = json::array();
    double worst = 0.0;
    bool all_passed = true;

    auto record = [&](const std::string& name, const GradCheckReport& rep) {
        results.push_back({{"module", name},
                           {"max_rel_err", rep.max_rel_err},
                           {"passed", rep.passed}});
        worst = std::max(worst, rep.max_rel_err);
        all_passed = all_passed && rep.passed;
        std::cout << "gradcheck " << name << ": max rel err " << rep.max_rel_err
                  << (rep.passed ? " [ok]" : " [FAIL]") << "\n";
    };
    auto jitter = [&](ParamSet& params) {
        // keep leaky-ReLU inputs away from the exact kink the zero-init
        // projections would otherwise sit on
        for (auto& [name, t] : params.items)
            for (double& v : t.data()) v += rng.uniform(-0.05, 0.05);
    };

    SrgbImage img(12, 12);
    for (double& v : img.data) v = rng.uniform(0.05, 0.95);

    if (module == "all" || module == "cat") {
        CatParams cat = CatParams::init(4, 3, rng);
        ParamSet params;
        cat.register_params(params, "cat.", true);
        jitter(params);
        auto loss = [&] { return ops::mean(ops::square(cat_forward(img, cat, true))); };
        record("cat", grad_check(loss, params, 1e-3, 1e-4, 1e-6, samples, seed));
    }
    if (module == "all" || module == "cndn") {
        CndnParams cndn = CndnParams::init(6, 8, rng);
        ParamSet params;
        cndn.register_params(params, "cndn.");
        jitter(params);
        Tensor x = image_to_tensor(img);
        Tensor y = Tensor::zeros({6, img.height, img.width});
        for (double& v : y.data()) v = rng.uniform(0.0, 1.0);
        auto loss = [&] {
            CndnOutput out = cndn_decompose(x, y, cndn);
            return ops::add(ops::mean(ops::square(out.x_tilde)),
                            ops::mean(ops::square(out.noise)));
        };
        record("cndn", grad_check(loss, params, 1e-3, 1e-4, 1e-6, samples, seed));
    }
    if (module == "all" || module == "backbone") {
        BackboneParams bb = BackboneParams::init(8, 2, rng);
        ParamSet params;
        bb.register_params(params, "backbone.");
        jitter(params);
        Tensor x = image_to_tensor(img);
        auto loss = [&] {
            return ops::mean(ops::square(ops::add_scalar(backbone_forward(x, bb), -0.4)));
        };
        record("backbone", grad_check(loss, params, 1e-3, 1e-4, 1e-6, samples, seed));
    }
    if (module == "all" || module == "model") {
        ModelConfig mc;
        mc.embed_dim = 8;
        mc.dcaf_channels = 6;
        mc.backbone_dim = 8;
        mc.backbone_blocks = 1;
        mc.seed = seed;
        PicatModel model = PicatModel::init(mc);
        ParamSet params = model.params();
        jitter(params);
        Tensor target = Tensor::full({3, img.height, img.width}, 0.5);
        auto loss = [&] {
            // smooth surrogate of the training loss: L1 would put finite
            // differences across kinks
            PicatModel::Forward f = model.forward(img);
            Tensor rec = ops::mean(ops::square(ops::sub(f.enhanced, target)));
            return ops::add(rec, ops::mul_scalar(ops::mean(ops::square(f.noise)), 0.01));
        };
        record("model", grad_check(loss, params, 1e-3, 1e-4, 1e-6, samples, seed));
    }
    if (results.empty()) throw std::runtime_error("unknown module: " + module);

    manifest.doc["results"] = results;
    manifest.doc["max_rel_err"] = worst;
    return all_passed ? kExitOk : kExitCheckFailed;
}

// ------------------------------------------------------------------- report

int cmd_report(const std::vector<std::string>& inputs, ManifestWriter& manifest) {
    json loaded = json::array();
    for (const std::string& path : inputs) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        json doc;
        in >> doc;
        loaded.push_back({{"path", path}, {"doc", doc}});
        std::cout << "== " << path << "\n";
        if (doc.contains("subcommand"))
            std::cout << "  subcommand: " << doc["subcommand"].get<std::string>()
                      << "  status: " << doc.value("status", "?") << "\n";
        if (doc.contains("metrics")) {
            for (auto& [k, v] : doc["metrics"].items())
                std::cout << "  " << k << ": " << v.dump() << "\n";
        }
        if (doc.contains("aggregates")) {
            for (auto& agg : doc["aggregates"])
                std::cout << "  " << agg.value("kind", "?") << " sigma "
                          << agg.value("sigma", 0.0) << ": PSNR "
                          << agg.value("mean_psnr_db", 0.0) << " dB\n";
        }
        if (doc.contains("error"))
            std::cout << "  error: " << doc["error"].get<std::string>() << "\n";
    }
    manifest.doc["inputs"] = loaded;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"PiCat low-light enhancement pipeline"};
    app.require_subcommand(1);

    // shared state bound into the subcommand options
    std::string config_path, input, out_dir = "picat_out", manifest_path;
    std::string data_dir, checkpoint_path, domain = "linear", kernel = "all";
    std::string kind = "spatial", module = "all";
    std::uint64_t seed = 1;
    bool do_linearize = false;
    double density_k = 2.0, sigma = 15.0, train_perturb_sigma = 0.0;
    int synth = 0, synth_size = 64, gradcheck_samples = 8;
    DegradeSpec degrade_spec{0.25, 1.2, 0.03, 0};
    TrainConfig tc;
    CommonModelFlags mf;
    std::vector<double> sweep;
    std::vector<std::string> report_inputs;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--manifest", manifest_path, "manifest output path");
        cmd->add_option("--seed", seed, "RNG seed");
    };
    auto add_synth = [&](CLI::App* cmd) {
        cmd->add_option("--data", data_dir, "dataset dir with low/ and high/");
        cmd->add_option("--synth", synth, "synthesize N image pairs instead");
        cmd->add_option("--synth-size", synth_size, "synthetic image side");
        cmd->add_option("--gain", degrade_spec.gain, "degradation gain");
        cmd->add_option("--gamma", degrade_spec.gamma, "degradation gamma");
        cmd->add_option("--noise", degrade_spec.noise_std, "degradation noise std");
    };

    CLI::App* transform = app.add_subcommand("transform", "export descriptors");
    transform->add_option("--input", input, "image or directory")->required();
    transform->add_option("--out", out_dir, "output directory");
    transform->add_option("--domain", domain, "linear|log")
        ->check(CLI::IsMember({"linear", "log"}));
    transform->add_option("--kernel", kernel, "all|gaussian3x3|laplacian3x3")
        ->check(CLI::IsMember({"all", "gaussian3x3", "laplacian3x3"}));
    transform->add_flag("--linearize", do_linearize, "apply gamma 2.2 linearization");
    transform->add_option("--density-k", density_k, "density scaling exponent k");
    add_common(transform);

    CLI::App* train = app.add_subcommand("train", "train the toy pipeline");
    add_synth(train);
    train->add_option("--steps", tc.total_steps, "optimizer steps");
    train->add_option("--batch", tc.batch_size, "patches per step");
    train->add_option("--patch", tc.patch_size, "training patch side");
    train->add_option("--lr", tc.lr0, "initial learning rate");
    train->add_option("--val-interval", tc.val_interval, "steps between validations");
    train->add_option("--noise-weight", tc.loss.noise, "noise-energy loss weight");
    train->add_option("--train-perturb-sigma", train_perturb_sigma,
                      "spatial noise added to training inputs");
    train->add_option("--out", checkpoint_path, "checkpoint path");
    mf.attach(train);
    add_common(train);

    CLI::App* enhance = app.add_subcommand("enhance", "run the model on images");
    enhance->add_option("--checkpoint", checkpoint_path, "PICT checkpoint");
    enhance->add_option("--input", input, "image or directory")->required();
    enhance->add_option("--out", out_dir, "output directory");
    mf.attach(enhance);
    add_common(enhance);

    CLI::App* eval = app.add_subcommand("eval", "evaluate with perturbation sweeps");
    eval->add_option("--checkpoint", checkpoint_path, "PICT checkpoint");
    add_synth(eval);
    eval->add_option("--sweep", sweep, "perturbation sigmas")->delimiter(',');
    eval->add_option("--kind", kind, "spatial|frequency")
        ->check(CLI::IsMember({"spatial", "frequency"}));
    eval->add_option("--out", out_dir, "report directory");
    mf.attach(eval);
    add_common(eval);

    CLI::App* perturb_cmd = app.add_subcommand("perturb", "noise-perturb images");
    perturb_cmd->add_option("--input", input, "image or directory")->required();
    perturb_cmd->add_option("--out", out_dir, "output directory");
    perturb_cmd->add_option("--kind", kind, "spatial|frequency")
        ->check(CLI::IsMember({"spatial", "frequency"}));
    perturb_cmd->add_option("--sigma", sigma, "noise std (0-255 scale for spatial)");
    add_common(perturb_cmd);

    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck_cmd->add_option("--module", module, "all|cat|cndn|backbone|model")
        ->check(CLI::IsMember({"all", "cat", "cndn", "backbone", "model"}));
    gradcheck_cmd->add_option("--samples", gradcheck_samples,
                              "elements sampled per tensor (0 = all)");
    add_common(gradcheck_cmd);

    CLI::App* report = app.add_subcommand("report", "summarize manifests/reports");
    report->add_option("--input", report_inputs, "manifest or report JSON files")
        ->required();
    add_common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* cmd = app.get_subcommands().front();
    ManifestWriter manifest(cmd->get_name());
    try {
        apply_config_file(cmd, config_path);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (manifest_path.empty())
        manifest_path = (fs::path(out_dir) / "manifest.json").string();
    manifest.path = manifest_path;
    manifest.doc["seed"] = seed;

    try {
        tc.seed = seed;
        int code = kExitRuntime;
        if (cmd == transform)
            code = cmd_transform(input, out_dir, domain, kernel, do_linearize,
                                 density_k, manifest);
        else if (cmd == train)
            code = cmd_train(data_dir, synth, synth_size, degrade_spec, mf, tc,
                             train_perturb_sigma, checkpoint_path, manifest);
        else if (cmd == enhance)
            code = cmd_enhance(checkpoint_path, input, out_dir, mf, seed, manifest);
        else if (cmd == eval)
            code = cmd_eval(checkpoint_path, data_dir, synth, synth_size,
                            degrade_spec, mf, sweep, kind, seed, out_dir, manifest);
        else if (cmd == perturb_cmd)
            code = cmd_perturb(input, out_dir, kind, sigma, seed, manifest);
        else if (cmd == gradcheck_cmd)
            code = cmd_gradcheck(module, seed, gradcheck_samples, manifest);
        else if (cmd == report)
            code = cmd_report(report_inputs, manifest);
        manifest.finish(code == kExitOk ? "ok" : "check_failed");
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        manifest.finish("error", e.what());
        return kExitRuntime;
    }
}
