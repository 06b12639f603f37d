// End-to-end checks of the picat command-line tool. Takes the binary path as
// argv[1] and exercises the documented contract: exit codes, config
// precedence, manifest-on-failure, and the per-subcommand outputs.

#include "picat/image.hpp"
#include "picat/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using picat::Rng;
using picat::SrgbImage;

namespace {

std::string g_binary;
fs::path g_root;
int g_failures = 0;

void check(bool ok, const std::string& what) {
    if (!ok) {
        ++g_failures;
        std::cout << "FAIL: " << what << "\n";
    }
}

int run(const std::string& args, std::string* output = nullptr) {
    static int counter = 0;
    const fs::path log = g_root / ("cmd" + std::to_string(counter++) + ".log");
    const std::string cmd =
        g_binary + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream in(log);
        std::stringstream ss;
        ss << in.rdbuf();
        *output = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const std::exception& e) {
        ++g_failures;
        std::cout << "FAIL: cannot parse " << path << ": " << e.what() << "\n";
        return json::object();
    }
}

SrgbImage random_image(int h, int w, std::uint64_t seed) {
    SrgbImage img(h, w);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform(0.05, 0.95);
    return img;
}

// keep train invocations tiny; the model contract is covered in unit tests
const std::string kTinyModel =
    " --embed-dim 6 --dcaf-channels 4 --backbone-dim 6 --backbone-blocks 1";
const std::string kTinyData =
    " --synth 6 --synth-size 24 --patch 16 --batch 2" + kTinyModel;
const std::string kTinyTrain = kTinyData + " --steps 2";

void test_usage_errors() {
    std::string out;
    check(run("", &out) == 1, "no subcommand exits 1");
    check(run("train --no-such-flag", &out) == 1, "unknown flag exits 1");
    check(run("perturb --input x.png --kind sideways", &out) == 1,
          "invalid enum value exits 1");
}

void test_perturb_identity() {
    const fs::path in_dir = g_root / "perturb_in";
    const fs::path out_dir = g_root / "perturb_out";
    fs::create_directories(in_dir);
    picat::save_png(random_image(20, 24, 1), (in_dir / "a.png").string());
    picat::save_png(random_image(16, 16, 2), (in_dir / "b.png").string());

    int code = run("perturb --input " + in_dir.string() + " --out " +
                   out_dir.string() + " --sigma 0 --manifest " +
                   (g_root / "perturb.json").string());
    check(code == 0, "perturb exits 0");
    for (const char* name : {"a.png", "b.png"})
        check(read_file(in_dir / name) == read_file(out_dir / name),
              std::string("sigma 0 leaves ") + name + " byte-identical");
    json manifest = read_json(g_root / "perturb.json");
    check(manifest["status"] == "ok", "perturb manifest status ok");
    check(manifest["outputs"].size() == 2, "perturb manifest lists outputs");

    // frequency noise at sigma 0 must also be the identity
    const fs::path freq_dir = g_root / "perturb_freq";
    code = run("perturb --input " + (in_dir / "a.png").string() + " --out " +
               freq_dir.string() + " --sigma 0 --kind frequency --manifest " +
               (g_root / "perturb_freq.json").string());
    check(code == 0, "frequency perturb exits 0");
    check(read_file(in_dir / "a.png") == read_file(freq_dir / "a.png"),
          "frequency sigma 0 is the identity");
}

void test_manifest_on_failure() {
    const fs::path manifest_path = g_root / "fail.json";
    int code = run("perturb --input " + (g_root / "missing_dir").string() +
                   " --out " + (g_root / "fail_out").string() + " --manifest " +
                   manifest_path.string());
    check(code == 2, "missing input exits 2");
    json manifest = read_json(manifest_path);
    check(manifest["status"] == "error", "failure manifest records error status");
    check(!manifest["error"].get<std::string>().empty(),
          "failure manifest records the message");
}

void test_config_precedence() {
    const fs::path cfg = g_root / "train_cfg.json";
    std::ofstream(cfg) << R"({"steps": 4, "noise": 0.01})";
    const fs::path m1 = g_root / "train1.json";
    const fs::path m2 = g_root / "train2.json";

    int code = run("train" + kTinyData + " --steps 3 --config " + cfg.string() +
                   " --out " + (g_root / "t1.pict").string() + " --manifest " +
                   m1.string());
    check(code == 0, "train with config exits 0");
    // CLI flag wins over the config file value
    check(read_json(m1)["config"]["train"]["total_steps"] == 3,
          "explicit --steps overrides the config file");

    std::string args = "train" + kTinyData + " --config " + cfg.string() +
                       " --out " + (g_root / "t2.pict").string() +
                       " --manifest " + m2.string();
    check(run(args) == 0, "train from config exits 0");
    // config file value wins over the built-in default (500)
    json m2_doc = read_json(m2);
    check(m2_doc["config"]["train"]["total_steps"] == 4,
          "config file overrides the default step count");
    check(m2_doc["config"]["dataset"]["noise_std"] == 0.01,
          "second config key lands as well");

    const fs::path bad = g_root / "bad_cfg.json";
    std::ofstream(bad) << R"({"stepz": 4})";
    std::string out;
    check(run("train" + kTinyTrain + " --config " + bad.string(), &out) == 1,
          "unknown config key exits 1");
    check(out.find("stepz") != std::string::npos,
          "unknown config key is named in the error");
}

void test_train_determinism() {
    auto train_to = [&](const std::string& stem, int seed) {
        int code = run("train" + kTinyTrain + " --seed " + std::to_string(seed) +
                       " --out " + (g_root / (stem + ".pict")).string() +
                       " --manifest " + (g_root / (stem + ".json")).string());
        check(code == 0, "train " + stem + " exits 0");
    };
    train_to("d1", 9);
    train_to("d2", 9);
    train_to("d3", 10);
    check(read_file(g_root / "d1.pict") == read_file(g_root / "d2.pict"),
          "same seed reproduces the checkpoint bit-for-bit");
    check(read_file(g_root / "d1.pict") != read_file(g_root / "d3.pict"),
          "different seed changes the checkpoint");
    json manifest = read_json(g_root / "d1.json");
    check(manifest["metrics"].contains("final_psnr_enhanced_db"),
          "train manifest carries metrics");
}

void test_enhance_identity_at_init() {
    const fs::path in_dir = g_root / "enh_in";
    const fs::path out_dir = g_root / "enh_out";
    fs::create_directories(in_dir);
    picat::save_png(random_image(24, 24, 3), (in_dir / "img.png").string());

    // without a checkpoint the network is the identity by construction
    int code = run("enhance --input " + in_dir.string() + " --out " +
                   out_dir.string() + " --manifest " +
                   (g_root / "enh.json").string());
    check(code == 0, "enhance exits 0");
    check(read_file(in_dir / "img.png") == read_file(out_dir / "img.png"),
          "enhance at init is the identity");

    // trained checkpoint must change the output
    code = run("enhance --input " + in_dir.string() + " --out " +
               (g_root / "enh_out2").string() + kTinyModel +
               " --checkpoint " + (g_root / "d1.pict").string() +
               " --manifest " + (g_root / "enh2.json").string());
    check(code == 0, "enhance with checkpoint exits 0");
    check(read_file(in_dir / "img.png") !=
              read_file(g_root / "enh_out2" / "img.png"),
          "trained checkpoint changes the output");

    // checkpoint/model mismatch is a runtime failure
    code = run("enhance --input " + in_dir.string() + " --out " +
               (g_root / "enh_out3").string() + " --checkpoint " +
               (g_root / "d1.pict").string() + " --manifest " +
               (g_root / "enh3.json").string());
    check(code == 2, "checkpoint shape mismatch exits 2");
    check(read_json(g_root / "enh3.json")["status"] == "error",
          "mismatch manifest records the error");
}

void test_eval_reports() {
    const fs::path out_dir = g_root / "eval_out";
    std::string out;
    int code = run("eval --synth 4 --synth-size 24 --embed-dim 6"
                   " --dcaf-channels 4 --backbone-dim 6 --backbone-blocks 1"
                   " --sweep 5,10 --out " +
                       out_dir.string() + " --manifest " +
                       (g_root / "eval.json").string(),
                   &out);
    check(code == 0, "eval exits 0");
    std::string csv = read_file(out_dir / "report.csv");
    check(csv.rfind("image,psnr_db,ssim,sigma,kind\n", 0) == 0,
          "report.csv starts with the documented header");
    // 4 images x (clean + two sweep points) + header
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    check(lines == 13, "report.csv has one row per image and sweep point");
    json report = read_json(out_dir / "report.json");
    check(report["aggregates"].size() == 3, "report.json aggregates clean+2 sigmas");
    check(read_json(g_root / "eval.json")["aggregates"].size() == 3,
          "eval manifest echoes the aggregates");
}

void test_gradcheck() {
    std::string out;
    int code = run("gradcheck --module cat --samples 2 --manifest " +
                       (g_root / "gc.json").string(),
                   &out);
    check(code == 0, "gradcheck on the transform module exits 0");
    json manifest = read_json(g_root / "gc.json");
    check(manifest["status"] == "ok", "gradcheck manifest status ok");
    check(manifest["results"].size() == 1, "gradcheck reports the one module");
}

void test_report() {
    std::string out;
    int code = run("report --input " + (g_root / "d1.json").string() +
                       " --manifest " + (g_root / "report_m.json").string(),
                   &out);
    check(code == 0, "report exits 0");
    check(out.find("train") != std::string::npos,
          "report names the summarized subcommand");
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <picat-binary>\n";
        return 2;
    }
    g_binary = argv[1];
    g_root = fs::temp_directory_path() / "picat_cli_tests";
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    test_usage_errors();
    test_perturb_identity();
    test_manifest_on_failure();
    test_config_precedence();
    test_train_determinism();
    test_enhance_identity_at_init();
    test_eval_reports();
    test_gradcheck();
    test_report();

    if (g_failures == 0) {
        std::cout << "cli_tests: all checks passed\n";
        return 0;
    }
    std::cout << "cli_tests: " << g_failures << " check(s) failed\n";
    return 1;
}
